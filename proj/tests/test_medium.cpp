#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "layerfmm/medium.hpp"

using namespace layerfmm;

TEST_CASE("medium construction validates its invariants") {
  CHECK_THROWS_AS(LayeredMedium::acoustic({}, {1.0}), DomainError);
  CHECK_THROWS_AS(LayeredMedium::acoustic({0.0, 1.0}, {1.0, 1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(LayeredMedium::acoustic({0.0}, {1.0}), DomainError);
  CHECK_THROWS_AS(LayeredMedium::acoustic({0.0}, {1.0, -2.0}), DomainError);
  CHECK_THROWS_AS(LayeredMedium::acoustic({0.0}, {1.0, 2.0}, {1.0}), DomainError);
  CHECK_THROWS_AS(LayeredMedium::acoustic({0.0}, {1.0, 2.0}, {1.0, 0.0}), DomainError);
  const auto m = LayeredMedium::acoustic({0.0, -2.0}, {1.0, 1.5, 2.0}, {1.0, 2.0, 3.0});
  CHECK(m.num_interfaces() == 2);
  CHECK(m.num_layers() == 3);
  CHECK(m.k_max() == 2.0);
  CHECK(m.k_min() == 1.0);
  const auto& r = m.rows(1);
  CHECK(r[0].a_upper == 1.0);
  CHECK(r[0].a_lower == 1.0);
  CHECK(r[1].b_upper == cplx(0.5));
  CHECK(std::abs(r[1].b_lower - 1.0 / 3.0) < 1e-15);
  const auto lossy = m.with_loss(1e-3);
  CHECK(lossy.k(1) == cplx(1.5, 1.5e-3));
}

TEST_CASE("layer_of") {
  const auto one = LayeredMedium::acoustic({0.0}, {1.0, 1.0});
  CHECK(layer_of(one, 1.0) == 0);
  CHECK(layer_of(one, -1.0) == 1);
  CHECK_THROWS_AS(layer_of(one, 0.0), BoundaryTieError);
  const auto two = LayeredMedium::acoustic({0.0, -2.0}, {1.0, 1.0, 1.0});
  CHECK(layer_of(two, -1.0) == 1);
  CHECK(layer_of(two, -3.0) == 2);
}

TEST_CASE("relevant_interface and admissibility") {
  const auto m = LayeredMedium::acoustic({0.0, -2.0}, {1.0, 1.0, 1.0});
  CHECK(relevant_interface(m, 0, Dir::up) == 0.0);
  CHECK(relevant_interface(m, 1, Dir::down) == 0.0);
  CHECK(relevant_interface(m, 1, Dir::up) == -2.0);
  CHECK_THROWS_AS(relevant_interface(m, 0, Dir::down), InadmissibleError);
  CHECK_THROWS_AS(relevant_interface(m, 2, Dir::up), InadmissibleError);

  const auto top = admissible_components(0, 0, 2);
  REQUIRE(top.size() == 1);
  CHECK(top[0] == ReactionComponentId{0, 0, Dir::up, Dir::up});
  const auto bottom = admissible_components(2, 2, 2);
  REQUIRE(bottom.size() == 1);
  CHECK(bottom[0] == ReactionComponentId{2, 2, Dir::down, Dir::down});
  CHECK(admissible_components(1, 1, 2).size() == 4);
  CHECK(admissible_components(0, 1, 2).size() == 2);
}

TEST_CASE("polarized distance examples") {
  const double d = 0.5;
  const auto m = LayeredMedium::acoustic({d}, {1.0, 1.0});
  const ReactionComponentId uu{0, 0, Dir::up, Dir::up};
  CHECK(polarized_distance(m, {{0.0, d + 1.0}, {0.0, d + 2.0}, uu}) == doctest::Approx(3.0));

  const auto m0 = LayeredMedium::acoustic({0.0}, {1.0, 1.0});
  const ReactionComponentId ud{0, 1, Dir::up, Dir::down};
  CHECK(polarized_distance(m0, {{3.0, 4.0}, {0.0, -1.0}, ud}) ==
        doctest::Approx(std::sqrt(34.0)));
  CHECK_THROWS_AS(polarized_distance(m0, {{3.0, -4.0}, {0.0, -1.0}, ud}), DomainError);
}

TEST_CASE("polarization image is the Euclidean form of the polarized distance") {
  const auto m = LayeredMedium::acoustic({1.0, -0.5, -2.0}, {1.0, 1.2, 1.4, 1.6});
  const int L = m.num_interfaces();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), uf(0.05, 0.95), uh(0.1, 2.0);
  auto sample = [&](int l, Dir d) {
    // Strictly inside layer l on the polarized side of its relevant interface.
    const double top = l == 0 ? m.depth(0) + 3.0 : m.depth(l - 1);
    const double bot = l == L ? m.depth(L - 1) - 3.0 : m.depth(l);
    (void)d;
    return Point{ux(rng), bot + uf(rng) * (top - bot)};
  };
  int checked = 0;
  for (int t = 0; t <= L; ++t) {
    for (int s = 0; s <= L; ++s) {
      for (const auto& id : admissible_components(t, s, L)) {
        for (int i = 0; i < 20; ++i) {
          const Point x1 = sample(t, id.dir_t);
          const Point x2 = sample(s, id.dir_s);
          const PolarizedPair pair{x1, x2, id};
          const Point img = polarization_image(m, id, x2);
          CHECK(img.x == x2.x);
          CHECK(polarized_distance(m, pair) == doctest::Approx(norm(x1 - img)).epsilon(1e-14));
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("mirror image and asymmetry") {
  const double d = -0.3;
  const auto m = LayeredMedium::acoustic({d}, {1.0, 2.0});
  const ReactionComponentId uu{0, 0, Dir::up, Dir::up};
  const Point img = polarization_image(m, uu, {0.7, d + 1.1});
  CHECK(img.x == 0.7);
  CHECK(img.y == doctest::Approx(d - 1.1));
  CHECK(img.y < d);

  const auto m2 = LayeredMedium::acoustic({0.0, -1.0}, {1.0, 1.0, 1.0});
  const ReactionComponentId id{0, 1, Dir::up, Dir::up};
  const Point a{0.2, 0.4}, b{1.0, -0.8};
  const Point a2{0.2, -0.6}, b2{1.0, 0.5};
  const double dab = polarized_distance(m2, {a, b, id});
  const double dba = polarized_distance(m2, {a2 + Point{0.0, 0.0}, b2, {1, 0, Dir::up, Dir::up}});
  CHECK(dab != doctest::Approx(dba));

  // Swapping the roles brings the image back to a point with the same abscissa.
  const Point back = polarization_image(m2, {1, 0, Dir::up, Dir::up},
                                        polarization_image(m2, id, b) + Point{0.0, 1.5});
  CHECK(back.x == b.x);
}
