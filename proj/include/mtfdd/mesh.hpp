#pragma once

// Conforming P1 triangle meshes, the partitioned-disk generator, the
// "mtf-mesh 1" file format and skeleton extraction.
//
// Conventions used throughout the library:
//  * triangles are counterclockwise, tags number subdomains 0..J densely;
//  * every edge of the mesh outer boundary is "artificial" (the truncation
//    of free space), every edge between two different tags is a skeleton
//    (interface) edge;
//  * per-subdomain boundary edges are oriented with the subdomain on their
//    left, so the outward normal is the edge direction rotated by -pi/2.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtfdd {

struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> tag;  // subdomain id per triangle
};

inline int num_subdomains(const Mesh& m) {
  int top = -1;
  for (int t : m.tag) top = std::max(top, t);
  return top + 1;
}

namespace detail {

inline long long edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<long long>(a) << 32) | static_cast<unsigned>(b);
}

// Incident triangles per undirected edge; {-1,-1} slots unused.
inline std::unordered_map<long long, std::array<int, 2>> edge_incidence(
    const Mesh& m) {
  std::unordered_map<long long, std::array<int, 2>> inc;
  inc.reserve(3 * m.triangles.size());
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    for (int k = 0; k < 3; ++k) {
      long long key =
          edge_key(m.triangles[t][k], m.triangles[t][(k + 1) % 3]);
      auto [it, fresh] = inc.try_emplace(key, std::array<int, 2>{t, -1});
      if (!fresh) {
        if (it->second[1] != -1)
          throw std::runtime_error(
              "mesh: edge shared by more than two triangles near triangle " +
              std::to_string(t));
        it->second[1] = t;
      }
    }
  }
  return inc;
}

}  // namespace detail

inline double signed_area(const Mesh& m, int t) {
  const auto& a = m.vertices[m.triangles[t][0]];
  const auto& b = m.vertices[m.triangles[t][1]];
  const auto& c = m.vertices[m.triangles[t][2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (c.x() - a.x()) * (b.y() - a.y()));
}

inline void validate(const Mesh& m) {
  if (m.triangles.size() != m.tag.size())
    throw std::runtime_error("mesh: tag count does not match triangle count");
  if (m.triangles.empty()) throw std::runtime_error("mesh: no triangles");
  int nv = static_cast<int>(m.vertices.size());
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    for (int v : m.triangles[t])
      if (v < 0 || v >= nv)
        throw std::runtime_error("mesh: vertex index out of range in triangle " +
                                 std::to_string(t));
    if (m.tag[t] < 0)
      throw std::runtime_error("mesh: negative tag on triangle " +
                               std::to_string(t));
    if (!(signed_area(m, t) > 0.0))
      throw std::runtime_error(
          "mesh: non-positive (flipped or degenerate) triangle " +
          std::to_string(t));
  }
  std::vector<char> present(num_subdomains(m), 0);
  for (int t : m.tag) present[t] = 1;
  for (int j = 0; j < static_cast<int>(present.size()); ++j)
    if (!present[j])
      throw std::runtime_error("mesh: subdomain tags are not dense, missing " +
                               std::to_string(j));
  detail::edge_incidence(m);  // throws on over-shared edges
}

// ---------------------------------------------------------------------------
// Partitioned disk generator.
//
// Disk of radius r_skeleton cut into n_sectors pie slices (subdomains
// 1..n_sectors, sharing the center), surrounded by the annulus
// r_skeleton..r_outer (subdomain 0, the truncated exterior). Polar grid:
// every ring carries the same n_theta vertices, n_theta a multiple of
// n_sectors so sector interfaces are mesh lines.

inline Mesh generate_partitioned_disk(int n_sectors, double r_skeleton,
                                      double r_outer, double h) {
  if (n_sectors < 1)
    throw std::invalid_argument("generate_partitioned_disk: n_sectors < 1");
  if (!(r_skeleton > 0.0) || !(r_outer > r_skeleton))
    throw std::invalid_argument(
        "generate_partitioned_disk: need 0 < r_skeleton < r_outer");
  if (!(h > 0.0))
    throw std::invalid_argument("generate_partitioned_disk: h must be > 0");
  const double two_pi = 2.0 * std::numbers::pi;
  if (two_pi * r_skeleton / h < 3.0)
    throw std::invalid_argument(
        "generate_partitioned_disk: h too coarse, fewer than 3 vertices on "
        "the inner circle");

  int n_theta = n_sectors *
                std::max<long>(1, std::lround(two_pi * r_outer /
                                              (h * n_sectors)));
  while (n_theta < 3) n_theta += n_sectors;
  int nr_in = std::max<long>(1, std::lround(r_skeleton / h));
  int nr_out = std::max<long>(1, std::lround((r_outer - r_skeleton) / h));
  int nr = nr_in + nr_out;

  Mesh m;
  m.vertices.reserve(1 + static_cast<size_t>(nr) * n_theta);
  m.vertices.push_back({0.0, 0.0});
  for (int i = 1; i <= nr; ++i) {
    double r;
    if (i <= nr_in)
      r = (i == nr_in) ? r_skeleton : r_skeleton * i / nr_in;
    else
      r = (i == nr) ? r_outer
                    : r_skeleton +
                          (r_outer - r_skeleton) * (i - nr_in) / nr_out;
    for (int k = 0; k < n_theta; ++k) {
      double th = two_pi * k / n_theta;
      m.vertices.push_back({r * std::cos(th), r * std::sin(th)});
    }
  }
  auto vid = [n_theta](int ring, int k) {
    return 1 + (ring - 1) * n_theta + (k % n_theta);
  };

  auto push = [&m](int a, int b, int c) {
    m.triangles.push_back({a, b, c});
  };
  for (int k = 0; k < n_theta; ++k) push(0, vid(1, k), vid(1, k + 1));
  for (int i = 1; i < nr; ++i) {
    for (int k = 0; k < n_theta; ++k) {
      int a = vid(i, k), b = vid(i, k + 1);
      int c = vid(i + 1, k + 1), d = vid(i + 1, k);
      push(a, d, c);
      push(a, c, b);
    }
  }

  const double sector_angle = two_pi / n_sectors;
  m.tag.reserve(m.triangles.size());
  for (const auto& tri : m.triangles) {
    Eigen::Vector2d bary = (m.vertices[tri[0]] + m.vertices[tri[1]] +
                            m.vertices[tri[2]]) /
                           3.0;
    if (bary.norm() > r_skeleton) {
      m.tag.push_back(0);
    } else {
      double phi = std::atan2(bary.y(), bary.x());
      if (phi < 0.0) phi += two_pi;
      int s = std::min(n_sectors - 1, static_cast<int>(phi / sector_angle));
      m.tag.push_back(1 + s);
    }
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------
// File format "mtf-mesh 1": header, V block (x y), T block (v0 v1 v2 tag),
// 0-based indices, 17 significant digits.

inline void save_mesh(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out << "mtf-mesh 1\n";
  out << "V " << m.vertices.size() << "\n";
  char buf[80];
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x(), v.y());
    out << buf;
  }
  out << "T " << m.triangles.size() << "\n";
  for (size_t t = 0; t < m.triangles.size(); ++t)
    out << m.triangles[t][0] << ' ' << m.triangles[t][1] << ' '
        << m.triangles[t][2] << ' ' << m.tag[t] << "\n";
  if (!out) throw std::runtime_error("save_mesh: write failed for " + path);
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  int lineno = 0;
  auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error("load_mesh: " + path + ":" +
                              std::to_string(lineno) + ": " + what);
  };
  auto next_line = [&](std::string& line) {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  std::string line;
  if (!next_line(line) || line.substr(0, line.find_last_not_of(" \r") + 1) !=
                              "mtf-mesh 1")
    throw fail("expected header 'mtf-mesh 1'");

  auto read_count = [&](char tag) {
    std::string l;
    if (!next_line(l)) throw fail("unexpected end of file");
    std::istringstream s(l);
    char c;
    long n;
    std::string rest;
    if (!(s >> c >> n) || c != tag || n < 0 || (s >> rest))
      throw fail(std::string("expected '") + tag + " <count>'");
    return n;
  };

  Mesh m;
  long nv = read_count('V');
  m.vertices.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    if (!next_line(line)) throw fail("unexpected end of vertex block");
    std::istringstream s(line);
    double x, y;
    std::string rest;
    if (!(s >> x >> y) || (s >> rest)) throw fail("bad vertex line");
    m.vertices.push_back({x, y});
  }
  long nt = read_count('T');
  m.triangles.reserve(nt);
  m.tag.reserve(nt);
  for (long i = 0; i < nt; ++i) {
    if (!next_line(line)) throw fail("unexpected end of triangle block");
    std::istringstream s(line);
    int a, b, c, t;
    std::string rest;
    if (!(s >> a >> b >> c >> t) || (s >> rest)) throw fail("bad triangle line");
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv)
      throw fail("vertex index out of range");
    if (t < 0) throw fail("negative subdomain tag");
    m.triangles.push_back({a, b, c});
    m.tag.push_back(t);
  }
  if (next_line(line)) throw fail("trailing content after triangle block");
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------
// Skeleton extraction.

struct SubdomainBoundary {
  // Skeleton vertices of this subdomain, ordered along the boundary walk
  // (a closed loop, or one/more open chains ending on artificial edges).
  std::vector<int> vertices;
  std::vector<std::array<int, 2>> edges;  // skeleton edges, subdomain left
  std::vector<std::array<int, 2>> artificial_edges;  // truncation edges
};

struct Skeleton {
  std::vector<SubdomainBoundary> boundary;  // indexed by subdomain
  std::vector<int> vertices;  // skeleton vertex mesh ids, sorted ascending
  // restriction[j][k]: position of skeleton vertex k in boundary[j].vertices,
  // or -1 when subdomain j does not touch that vertex.
  std::vector<std::vector<int>> restriction;
  std::vector<int> cross_points;  // indices into `vertices`, >= 3 subdomains
};

inline Skeleton extract_skeleton(const Mesh& m) {
  validate(m);
  const int nsub = num_subdomains(m);
  auto inc = detail::edge_incidence(m);

  Skeleton sk;
  sk.boundary.resize(nsub);

  for (int j = 0; j < nsub; ++j) {
    // Directed boundary edges of subdomain j, found in triangle order.
    struct Hop {
      int to;
      bool skeleton;
      bool visited = false;
    };
    std::unordered_map<int, Hop> next;
    std::vector<int> tails;  // walk entry points, deterministic order
    for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
      if (m.tag[t] != j) continue;
      for (int k = 0; k < 3; ++k) {
        int a = m.triangles[t][k], b = m.triangles[t][(k + 1) % 3];
        const auto& pair = inc.at(detail::edge_key(a, b));
        int other = pair[0] == t ? pair[1] : pair[0];
        bool skel;
        if (other == -1)
          skel = false;  // mesh boundary: artificial truncation edge
        else if (m.tag[other] != j)
          skel = true;
        else
          continue;  // interior to the subdomain
        if (!next.try_emplace(a, Hop{b, skel}).second)
          throw std::runtime_error(
              "extract_skeleton: non-manifold boundary of subdomain " +
              std::to_string(j) + " at vertex " + std::to_string(a));
        tails.push_back(a);
      }
    }

    // Walk each boundary cycle once.
    struct Run {
      std::vector<int> verts;
      std::vector<std::array<int, 2>> edges;
    };
    std::vector<Run> runs;
    auto& out = sk.boundary[j];
    for (int start : tails) {
      if (next.at(start).visited) continue;
      std::vector<std::pair<int, bool>> cycle;  // (vertex, edge-to-next kind)
      int a = start;
      do {
        Hop& hop = next.at(a);
        if (hop.visited)
          throw std::runtime_error(
              "extract_skeleton: boundary walk of subdomain " +
              std::to_string(j) + " did not close");
        hop.visited = true;
        cycle.emplace_back(a, hop.skeleton);
        a = hop.to;
      } while (a != start);

      const int n = static_cast<int>(cycle.size());
      bool all_skel = std::all_of(cycle.begin(), cycle.end(),
                                  [](auto& p) { return p.second; });
      if (all_skel) {
        // Closed interface loop: start at the smallest vertex id.
        int pos = 0;
        for (int i = 1; i < n; ++i)
          if (cycle[i].first < cycle[pos].first) pos = i;
        Run run;
        for (int i = 0; i < n; ++i) {
          int p = (pos + i) % n;
          run.verts.push_back(cycle[p].first);
          run.edges.push_back({cycle[p].first, cycle[(p + 1) % n].first});
        }
        runs.push_back(std::move(run));
        continue;
      }
      // Mixed cycle: collect maximal skeleton chains; artificial edges kept
      // separately, in walk order.
      for (int i = 0; i < n; ++i) {
        bool prev_skel = cycle[(i + n - 1) % n].second;
        if (!cycle[i].second) {
          out.artificial_edges.push_back(
              {cycle[i].first, cycle[(i + 1) % n].first});
          continue;
        }
        if (prev_skel) continue;  // not the head of a chain
        Run run;
        int p = i;
        run.verts.push_back(cycle[p].first);
        while (cycle[p].second) {
          int q = (p + 1) % n;
          run.edges.push_back({cycle[p].first, cycle[q].first});
          run.verts.push_back(cycle[q].first);
          p = q;
        }
        runs.push_back(std::move(run));
      }
    }

    if (runs.empty())
      throw std::runtime_error("extract_skeleton: subdomain " +
                               std::to_string(j) +
                               " touches no interface");
    std::sort(runs.begin(), runs.end(),
              [](const Run& a, const Run& b) { return a.verts[0] < b.verts[0]; });
    for (auto& run : runs) {
      out.vertices.insert(out.vertices.end(), run.verts.begin(),
                          run.verts.end());
      out.edges.insert(out.edges.end(), run.edges.begin(), run.edges.end());
    }
  }

  // Global skeleton vertex set and restriction maps.
  for (const auto& b : sk.boundary)
    sk.vertices.insert(sk.vertices.end(), b.vertices.begin(),
                       b.vertices.end());
  std::sort(sk.vertices.begin(), sk.vertices.end());
  sk.vertices.erase(std::unique(sk.vertices.begin(), sk.vertices.end()),
                    sk.vertices.end());
  std::unordered_map<int, int> index_of;
  index_of.reserve(sk.vertices.size());
  for (int k = 0; k < static_cast<int>(sk.vertices.size()); ++k)
    index_of[sk.vertices[k]] = k;

  sk.restriction.assign(nsub, std::vector<int>(sk.vertices.size(), -1));
  for (int j = 0; j < nsub; ++j)
    for (int pos = 0; pos < static_cast<int>(sk.boundary[j].vertices.size());
         ++pos)
      sk.restriction[j][index_of.at(sk.boundary[j].vertices[pos])] = pos;

  for (int k = 0; k < static_cast<int>(sk.vertices.size()); ++k) {
    int mult = 0;
    for (int j = 0; j < nsub; ++j) mult += sk.restriction[j][k] >= 0;
    if (mult < 2)
      throw std::runtime_error("extract_skeleton: interface vertex " +
                               std::to_string(sk.vertices[k]) +
                               " belongs to fewer than two subdomains");
    if (mult >= 3) sk.cross_points.push_back(k);
  }
  return sk;
}

}  // namespace mtfdd
