#include "altersgd/param_vector.hpp"

#include "doctest.h"

using altersgd::ParamVector;

TEST_CASE("param vector arithmetic") {
    ParamVector a{1.0, 2.0, 2.0};
    ParamVector b{0.5, -1.0, 4.0};
    CHECK(altersgd::dot(a, b) == doctest::Approx(0.5 - 2.0 + 8.0));
    CHECK(altersgd::norm(a) == doctest::Approx(3.0));
    CHECK((a + b) == ParamVector{1.5, 1.0, 6.0});
    CHECK((a - b) == ParamVector{0.5, 3.0, -2.0});
    CHECK(altersgd::scaled(a, 2.0) == ParamVector{2.0, 4.0, 4.0});
    altersgd::axpy(-2.0, b, a);
    CHECK(a == ParamVector{0.0, 4.0, -6.0});
}

TEST_CASE("finiteness") {
    ParamVector v(3, 1.0);
    CHECK(v.all_finite());
    v[1] = std::nan("");
    CHECK_FALSE(v.all_finite());
}
