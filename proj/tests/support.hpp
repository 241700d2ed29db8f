#pragma once

// Shared helpers for the test suite: tiny hand-built meshes and seeded RNG.

#include <array>
#include <random>
#include <vector>

#include "mtfdd/mesh.hpp"

namespace testsupport {

// Unit square [0,1]^2, four triangles around the center vertex, split into
// two subdomains by the vertical diagonal chain 1-4-3.
//
//   3 ---- 2
//   | \  / |
//   |  4   |        tags: left of 1-4-3 -> 0, right -> 1
//   | /  \ |
//   0 ---- 1
inline mtfdd::Mesh four_triangle_square() {
  mtfdd::Mesh m;
  m.vertices = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.5, 0.5}};
  m.triangles = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  m.tag = {0, 1, 1, 0};
  return m;
}

// Structured [0,1]^2 grid, n x n cells, two triangles each, split into
// subdomain 0 (x < 1/2) and 1 (x > 1/2). n must be even so the interface
// x = 1/2 is a mesh line.
inline mtfdd::Mesh split_square(int n) {
  mtfdd::Mesh m;
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.vertices.push_back({static_cast<double>(i) / n,
                            static_cast<double>(j) / n});
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      int tag = (2 * i < n) ? 0 : 1;
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.tag.push_back(tag);
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      m.tag.push_back(tag);
    }
  }
  return m;
}

inline std::mt19937_64 rng(unsigned long long seed = 20260815ULL) {
  return std::mt19937_64(seed);
}

}  // namespace testsupport
