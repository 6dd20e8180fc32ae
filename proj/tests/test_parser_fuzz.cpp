#include <doctest.h>

#include "parser_checks.hpp"

TEST_CASE("random inputs never escape the error hierarchy") {
  const parserchecks::FuzzResult r = parserchecks::run_parser_fuzz(100000, 7);
  INFO(r.failure);
  CHECK(r.failure.empty());
  CHECK(r.inputs == 100000);
  CHECK(r.parsed > 1000);
  CHECK(r.rejected > 1000);
}

TEST_CASE("dual-number gradients match differenced values on the corpus") {
  const parserchecks::DualResult r = parserchecks::check_dual_corpus(testsupport::data_dir() + "/data/dual_corpus.txt");
  INFO(r.worst_expr);
  CHECK(r.expressions == 100);
  CHECK(r.worst < 1e-6);
}
