#include "doctest.h"

#include "bcfl/errors.hpp"
#include "bcfl/ledger.hpp"
#include "support.hpp"

using namespace bcfl;

namespace {

Ledger make_ledger(std::uint64_t difficulty = 0) {
  return Ledger(LedgerConfig{"central", {"org1", "org2"}, difficulty, 100.0});
}

AnchorRoot anchor(std::uint64_t id) {
  AnchorRoot a{id, id * 10, {}};
  a.root[0] = static_cast<std::uint8_t>(id);
  return a;
}

// A 10-block chain with anchors, a selection, statuses and payouts.
Ledger busy_ledger() {
  Ledger l = make_ledger();
  for (std::uint64_t h = 1; h <= 10; ++h) {
    l.submit("org1", anchor(h));
    if (h == 3) l.submit("central", RegisterSelection{1, {"org1", "org2"}});
    if (h == 4) l.submit("org2", UpdateStatus{1, 200, 1.5});
    if (h == 5) l.submit("org2", IncentivePayout{"org2", 1, 350.0});
    l.seal_block();
  }
  return l;
}

}  // namespace

TEST_CASE("genesis holds the chain parameters") {
  const Ledger l = make_ledger();
  CHECK(l.height() == 0);
  const Block& g = l.blocks().front();
  CHECK(g.prev_hash == Digest{});
  REQUIRE(g.txs.size() == 3);
  CHECK(std::get<ChainParams>(g.txs[0].payload) == ChainParams{"central", 0, 100.0});
  CHECK(std::get<RegisterOrganization>(g.txs[1].payload).address == "org1");
  CHECK(l.state().organizations == std::vector<std::string>{"central", "org1", "org2"});
  CHECK(l.verify_chain().ok);
}

TEST_CASE("submit and seal") {
  Ledger l = make_ledger();
  const Receipt r1 = l.submit("org1", anchor(1));
  const Receipt r2 = l.submit("org2", anchor(1));
  CHECK(r1 == Receipt{1, 0});
  CHECK(r2 == Receipt{1, 1});
  CHECK(l.pending_count() == 2);
  const Block& b = l.seal_block();
  CHECK(b.height == 1);
  CHECK(b.txs.size() == 2);
  CHECK(b.txs[0].sender == "org1");
  CHECK(l.height() == 1);
  CHECK(l.pending_count() == 0);
}

TEST_CASE("empty blocks are allowed") {
  Ledger l = make_ledger();
  const Block& b = l.seal_block();
  CHECK(b.txs.empty());
  CHECK(l.height() == 1);
  CHECK(l.verify_chain().ok);
}

TEST_CASE("submission rules") {
  Ledger l = make_ledger();
  CHECK_THROWS_AS(l.submit("mallory", anchor(1)), LedgerRejection);
  const Transaction tx = l.make_transaction("org1", anchor(1));
  l.submit(tx);
  CHECK_THROWS_AS(l.submit(tx), LedgerRejection);
  Transaction forged = l.make_transaction("org1", anchor(2));
  forged.sender = "org2";
  CHECK_THROWS_AS(l.submit(forged), LedgerRejection);
  // rejected submissions leave nothing behind
  CHECK(l.pending_count() == 1);
}

TEST_CASE("registration") {
  Ledger l = make_ledger();
  CHECK_FALSE(l.is_registered("org3"));
  l.register_organization("org3");
  CHECK(l.is_registered("org3"));
  CHECK_NOTHROW(l.submit("org3", anchor(1)));
  l.register_organization("org3");
  l.seal_block();
  CHECK(l.replica("org3") == l.blocks());
  CHECK(l.query_tokens("org3") == 0.0);
  CHECK_THROWS_AS(l.query_tokens("nobody"), NotFound);
  CHECK_THROWS_AS(l.submit("org1", RegisterOrganization{"org4"}), LedgerRejection);
}

TEST_CASE("queries reflect sealed state only") {
  Ledger l = make_ledger();
  l.submit("org1", anchor(7));
  CHECK_THROWS_AS(l.query_root("org1", 7), NotFound);
  l.seal_block();
  CHECK(l.query_root("org1", 7).root == anchor(7).root);
  CHECK(l.query_root("org1", 7).period_time == 70);
  CHECK(l.query_tokens("org1") == 0.0);
  CHECK_THROWS_AS(l.query_contri("org1", 1), NotFound);
}

TEST_CASE("payouts add up") {
  Ledger l = make_ledger();
  l.submit("central", RegisterSelection{1, {"org1"}});
  l.submit("central", RegisterSelection{2, {"org1"}});
  l.submit("org1", UpdateStatus{1, 5, 0.05});
  l.submit("org1", UpdateStatus{2, 10, 0.05});
  l.submit("org1", IncentivePayout{"org1", 1, 10.0});
  l.submit("org1", IncentivePayout{"org1", 2, 15.0});
  l.seal_block();
  CHECK(l.query_tokens("org1") == 25.0);
  CHECK(l.query_contri("org1", 2).paid);
}

TEST_CASE("contract rules") {
  Ledger l = make_ledger();
  CHECK_THROWS_AS(l.submit("org1", RegisterSelection{1, {"org1"}}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("central", RegisterSelection{0, {"org1"}}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("central", RegisterSelection{1, {}}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("central", RegisterSelection{1, {"org1", "org1"}}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("central", RegisterSelection{1, {"ghost"}}), LedgerRejection);
  l.submit("central", RegisterSelection{1, {"org1"}});
  CHECK_THROWS_AS(l.submit("central", RegisterSelection{1, {"org2"}}), LedgerRejection);

  CHECK_THROWS_AS(l.submit("org2", UpdateStatus{1, 10, 1.0}), LedgerRejection);  // not selected
  CHECK_THROWS_AS(l.submit("org1", UpdateStatus{1, 0, 1.0}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("org1", UpdateStatus{1, 10, 0.0}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("org1", IncentivePayout{"org1", 1, 110.0}), LedgerRejection);  // unfinished
  l.submit("org1", UpdateStatus{1, 10, 1.0});
  CHECK_THROWS_AS(l.submit("org1", UpdateStatus{1, 10, 1.0}), LedgerRejection);
  CHECK_THROWS_AS(l.submit("org1", IncentivePayout{"org1", 1, 111.0}), LedgerRejection);  // wrong amount
  CHECK_THROWS_AS(l.submit("org2", IncentivePayout{"org1", 1, 110.0}), LedgerRejection);  // wrong claimant
  l.submit("org1", IncentivePayout{"org1", 1, 110.0});
  CHECK_THROWS_AS(l.submit("org1", IncentivePayout{"org1", 1, 110.0}), LedgerRejection);  // paid twice
  l.seal_block();
  CHECK(l.query_tokens("org1") == 110.0);
}

TEST_CASE("replicas stay identical") {
  const Ledger l = busy_ledger();
  CHECK(l.replicas_consistent());
  CHECK(l.replica("org1") == l.blocks());
  CHECK(l.replica("central") == l.blocks());
  CHECK_THROWS_AS(l.replica("nobody"), NotFound);
}

TEST_CASE("verify catches a tampered payload at its height") {
  const Ledger l = busy_ledger();
  CHECK(l.verify_chain().ok);
  std::vector<Block> blocks = l.blocks();
  std::get<AnchorRoot>(blocks[5].txs[0].payload).root[3] ^= 0x01;
  const auto v = verify_blocks(blocks, &l.state());
  CHECK_FALSE(v.ok);
  CHECK(v.first_invalid_height == 5u);
}

TEST_CASE("verify catches relinked and rehashed blocks") {
  const Ledger l = busy_ledger();
  std::vector<Block> blocks = l.blocks();
  // rewrite block 4 consistently; the link from block 5 breaks
  std::get<AnchorRoot>(blocks[4].txs[0].payload).root[0] ^= 0xff;
  blocks[4].txs[0].tx_id = blocks[4].txs[0].compute_id();
  blocks[4].block_hash = blocks[4].compute_hash();
  const auto v = verify_blocks(blocks, nullptr);
  CHECK(v.first_invalid_height == 5u);
}

TEST_CASE("replay reproduces the cached state") {
  const Ledger l = busy_ledger();
  CHECK(replay(l.blocks()) == l.state());
  ContractState wrong = l.state();
  wrong.tokens["org2"] += 1;
  const auto v = verify_blocks(l.blocks(), &wrong);
  CHECK_FALSE(v.ok);
  CHECK(v.first_invalid_height == l.height());
}

TEST_CASE("pow target arithmetic") {
  CHECK_FALSE(pow_target(0).has_value());
  CHECK_FALSE(pow_target(1).has_value());
  const Digest half = *pow_target(2);
  CHECK(half[0] == 0x80);
  for (std::size_t i = 1; i < 32; ++i) CHECK(half[i] == 0);
  // 2^256 / 2^14 = 2^242: byte 1 holds 0x04
  const Digest t = *pow_target(0x4000);
  CHECK(t[0] == 0x00);
  CHECK(t[1] == 0x04);
  for (std::size_t i = 2; i < 32; ++i) CHECK(t[i] == 0);
  // 2^256 / 3 = 0x5555...55
  const Digest third = *pow_target(3);
  for (std::uint8_t b : third) CHECK(b == 0x55);

  Digest below = t;
  below[1] = 0x03;
  below[31] = 0xff;
  CHECK(meets_target(below, t));
  CHECK_FALSE(meets_target(t, t));
}

TEST_CASE("sealed blocks meet the pow target") {
  Ledger l = make_ledger(0x4000);
  for (std::uint64_t h = 1; h <= 5; ++h) {
    l.submit("org1", anchor(h));
    const Block& b = l.seal_block();
    CHECK(meets_target(b.block_hash, pow_target(0x4000)));
  }
  CHECK(meets_target(l.blocks()[0].block_hash, pow_target(0x4000)));
  CHECK(l.verify_chain().ok);
}

TEST_CASE("snapshot round trip") {
  const Ledger l = busy_ledger();
  const std::string text = l.snapshot_json();
  const Ledger back = Ledger::from_snapshot_json(text);
  CHECK(back.blocks() == l.blocks());
  CHECK(back.state() == l.state());
  CHECK(back.config() == l.config());
  CHECK(back.snapshot_json() == text);
  CHECK(verify_snapshot(text).ok);

  const auto dir = testutil::scratch_dir("ledger_snapshot");
  l.save_snapshot(dir / "chain.json");
  CHECK(Ledger::load_snapshot(dir / "chain.json").blocks() == l.blocks());
}

TEST_CASE("a reloaded chain keeps growing") {
  const Ledger l = busy_ledger();
  Ledger back = Ledger::from_snapshot_json(l.snapshot_json());
  back.submit("org1", anchor(11));
  back.seal_block();
  CHECK(back.height() == 11);
  CHECK(back.verify_chain().ok);
  // timestamps keep increasing, so a fresh tx never collides with history
  CHECK(back.blocks().back().txs[0].timestamp > l.blocks().back().txs[0].timestamp);
}

TEST_CASE("snapshot damage is located") {
  const Ledger l = busy_ledger();
  const std::string text = l.snapshot_json();
  CHECK(verify_snapshot("").first_invalid_height == 0u);
  CHECK_FALSE(verify_snapshot("{}").ok);
  CHECK_THROWS_AS(Ledger::from_snapshot_json("not json"), DecodeError);

  // whitespace is not semantic, yet any deviation from the rendering counts
  std::string spaced = text;
  spaced.insert(spaced.size() - 1, " ");
  const auto v = verify_snapshot(spaced);
  CHECK_FALSE(v.ok);
  CHECK(v.first_invalid_height == l.height());

  const auto at = text.find("\"timestamp\": ", text.find("\"height\": 6"));
  std::string bumped = text;
  bumped[at + 13] = bumped[at + 13] == '9' ? '8' : static_cast<char>(bumped[at + 13] + 1);
  CHECK(verify_snapshot(bumped).first_invalid_height == 6u);
}

TEST_CASE("canonical encodings") {
  const Transaction tx = Transaction::make("org1", 7, anchor(2));
  const auto enc = tx.canonical_encoding();
  // type tag, then length-prefixed sender, then the big-endian timestamp
  CHECK(enc[0] == 0);
  CHECK(enc[1] == 0);
  CHECK(enc[4] == 4);
  CHECK(std::string(enc.begin() + 5, enc.begin() + 9) == "org1");
  CHECK(enc[16] == 7);
  CHECK(tx.tx_id == sha256(enc));
  CHECK(Transaction::make("org1", 8, anchor(2)).tx_id != tx.tx_id);
  CHECK(payload_type(Payload{UpdateStatus{}}) == "update_status");
}
