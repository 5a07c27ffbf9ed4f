#include <doctest.h>

#include "fixtures.hpp"
#include "lago/checkpoint.hpp"
#include "test_util.hpp"

using namespace lago;

TEST_CASE("checkpoint round trip") {
  const auto in = fixtures::random_instance(Variant::semantic_soft, CompMode::demorgan, PriorMode::per_attribute, 1);
  Checkpoint c;
  c.params = in.params;
  c.seed = 77;
  for (int m = 0; m < 12; ++m) c.attribute_names.push_back("a" + std::to_string(m));
  const std::string bytes = encode_checkpoint(c);
  CHECK(bytes.substr(0, 4) == "LAGC");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.params.w == c.params.w);
  CHECK(back.params.v == c.params.v);
  CHECK(back.params.zeta == c.params.zeta);
  CHECK(back.params.variant == c.params.variant);
  CHECK(back.params.comp_mode == c.params.comp_mode);
  CHECK(back.params.prior.values == c.params.prior.values);
  CHECK(back.params.groups->size() == 3);
  CHECK(back.seed == 77);
  CHECK(back.attribute_names == c.attribute_names);
  CHECK(encode_checkpoint(back) == bytes);

  testutil::TempDir dir;
  write_checkpoint(dir / "m.lagc", c);
  CHECK(read_checkpoint(dir / "m.lagc").params.w == c.params.w);
}

TEST_CASE("checkpoint rejects bad input") {
  CHECK_THROWS_AS(decode_checkpoint("NOPE"), Error);
  const auto in = fixtures::random_instance(Variant::singletons, CompMode::constant, PriorMode::uniform, 2);
  Checkpoint c;
  c.params = in.params;
  const std::string bytes = encode_checkpoint(c);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  testutil::TempDir dir;
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.lagc"), Error);
}
