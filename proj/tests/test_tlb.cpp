#include <doctest.h>

#include <random>

#include "core/error.hpp"
#include "core/project.hpp"
#include "layout/layout.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"
#include "support/samples.hpp"
#include "tlb/tlb.hpp"
#include "verify/static_verify.hpp"

using namespace memlayout;
using namespace memlayout::testing;

namespace {

TlbEntry sample_entry() {
  TlbEntry e;
  e.virtual_base = 0x10000000;
  e.physical_base = 0x20000000;
  e.log2_size = 16;
  e.permissions = *permissions_from_string("kr+kx");
  e.cache_policy = CachePolicy::Normal;
  e.pid = 0;
  e.valid = true;
  return e;
}

}  // namespace

TEST_CASE("decomposition: 20K block at a 16K-aligned base costs two entries") {
  auto chunks = decompose_range(0x10000000, 0x10000000, kib(20), kib(4), mib(256));
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].log2_size == 14);  // 16K
  CHECK(chunks[1].log2_size == 12);  // 4K
  CHECK(min_entry_cover(0x10000000, 0x10000000, kib(20), kib(4), mib(256)) == 2);
}

TEST_CASE("decomposition: exact power of two is a single entry") {
  auto chunks = decompose_range(0x10000, 0x20000, kib(64), kib(4), mib(256));
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].log2_size == 16);
}

TEST_CASE("decomposition: 12K block depends on the base residue") {
  // Base aligned to 4K only, base mod 8K = 4K: 4K + 8K.
  auto a = decompose_range(0x1000, 0x1000, kib(12), kib(4), mib(256));
  CHECK(a.size() == 2);
  CHECK(min_entry_cover(0x1000, 0x1000, kib(12), kib(4), mib(256)) == a.size());
  // Base aligned to 8K inside a 12K block: 8K + 4K.
  auto b = decompose_range(0x2000, 0x2000, kib(12), kib(4), mib(256));
  CHECK(b.size() == 2);
  // Worst case: base 4K mod 8K with both neighbours misaligned.
  auto c = decompose_range(0x5000, 0x5000, kib(12), kib(4), mib(256));
  CHECK(c.size() == min_entry_cover(0x5000, 0x5000, kib(12), kib(4), mib(256)));
}

TEST_CASE("decomposition is minimal against the dynamic-programming oracle") {
  std::mt19937_64 rng(base_seed() + 600);
  for (int iter = 0; iter < 400; ++iter) {
    Size pages = std::uniform_int_distribution<Size>(1, 64)(rng);
    Addr v = kib(4) * std::uniform_int_distribution<Addr>(0, 512)(rng);
    Addr p = kib(4) * std::uniform_int_distribution<Addr>(0, 512)(rng);
    Size max_entry = kib(4) << std::uniform_int_distribution<int>(2, 8)(rng);
    auto chunks = decompose_range(v, p, pages * kib(4), kib(4), max_entry);
    // Exact cover, each chunk size-aligned.
    Addr cur = v;
    for (const auto& c : chunks) {
      CHECK(c.virtual_base == cur);
      CHECK(c.virtual_base % (Size{1} << c.log2_size) == 0);
      CHECK(c.physical_base % (Size{1} << c.log2_size) == 0);
      CHECK((Size{1} << c.log2_size) <= max_entry);
      cur += Size{1} << c.log2_size;
    }
    CHECK(cur == v + pages * kib(4));
    CHECK(chunks.size() == min_entry_cover(v, p, pages * kib(4), kib(4), max_entry));
  }
}

TEST_CASE("unaligned ranges are rejected") {
  CHECK_THROWS_AS(decompose_range(0x1000, 0x1000, kib(20), kib(8), mib(1)), AlignmentError);
}

TEST_CASE("encoding matches the documented word layout") {
  EncodedTlbEntry w = encode_entry(sample_entry());
  CHECK(w.words[0] == 0x10000810u);
  CHECK(w.words[1] == 0x20000000u);
  CHECK(w.words[2] == 0x28u);
  CHECK(w.words[3] == 0x0u);
  CHECK(w.words[4] == 0x80000000u);
}

TEST_CASE("encode/decode round trip over random valid entries") {
  std::mt19937_64 rng(base_seed() + 700);
  for (int iter = 0; iter < 10000; ++iter) {
    TlbEntry e;
    e.log2_size = std::uniform_int_distribution<unsigned>(12, 24)(rng);
    Size span = Size{1} << e.log2_size;
    e.virtual_base = (std::uniform_int_distribution<Addr>(0, (Addr{1} << 32) / span - 1)(rng)) * span;
    e.physical_base = (std::uniform_int_distribution<Addr>(0, (Addr{1} << 36) / span - 1)(rng)) * span;
    e.permissions = Permissions::from_bits(std::uniform_int_distribution<unsigned>(1, 63)(rng));
    e.cache_policy = static_cast<CachePolicy>(std::uniform_int_distribution<int>(0, 4)(rng));
    e.pid = std::uniform_int_distribution<unsigned>(0, (1u << 14) - 1)(rng);
    e.valid = std::uniform_int_distribution<int>(0, 1)(rng) != 0;
    TlbEntry back = decode_entry(encode_entry(e));
    CHECK(back == e);
  }
}

TEST_CASE("invalid entries keep bit 11 clear and decode back invalid") {
  TlbEntry e = sample_entry();
  e.valid = false;
  EncodedTlbEntry w = encode_entry(e);
  CHECK((w.words[0] & 0x800u) == 0);
  CHECK_FALSE(decode_entry(w).valid);
}

TEST_CASE("encode range errors") {
  TlbEntry e = sample_entry();
  e.virtual_base = Addr{1} << 33;
  CHECK_THROWS_AS(encode_entry(e), RangeError);
  e = sample_entry();
  e.physical_base = Addr{1} << 37;
  CHECK_THROWS_AS(encode_entry(e), RangeError);
  e = sample_entry();
  e.pid = 5;
  CHECK_THROWS_AS(encode_entry(e, 2), RangeError);
  e = sample_entry();
  e.log2_size = 10;
  CHECK_THROWS_AS(encode_entry(e), RangeError);
}

TEST_CASE("decode rejects reserved bits in every word") {
  EncodedTlbEntry good = encode_entry(sample_entry());
  const std::uint32_t reserved[5] = {0x7C0u, 0xFF0u, ~0x3Fu, ~0xFu, 0x40000000u};
  for (int word = 0; word < 5; ++word) {
    EncodedTlbEntry bad = good;
    std::uint32_t mask = reserved[word];
    bad.words[word] |= mask & (mask ^ (mask & (mask - 1)));  // lowest reserved bit
    CHECK_THROWS_AS(decode_entry(bad), DecodeError);
  }
}

TEST_CASE("decode rejects a global flag that disagrees with the pid") {
  EncodedTlbEntry w = encode_entry(sample_entry());  // pid 0, global set
  w.words[4] &= ~0x80000000u;                        // clear global, pid stays 0
  CHECK_THROWS_AS(decode_entry(w), DecodeError);
}

TEST_CASE("sequences: P1010 has one four-entry sequence") {
  Project p = parse_project(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
  auto seqs = build_sequences(l);
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].entries.size() == 4);
  CHECK(l.mmu.entry_count - seqs[0].entries.size() == 12);
  // Kernel entries first, marked global.
  CHECK(seqs[0].entries[0].is_global());
  CHECK(seqs[0].entries[1].is_global());
  CHECK_FALSE(seqs[0].entries[2].is_global());
  CHECK(seqs[0].entries[2].pid == 1);
}

TEST_CASE("sequences: kernel-only layout produces none") {
  auto reqs = std::vector<MemoryBlockRequirement>{};
  MemoryBlockRequirement b;
  b.owner = Owner::kernel();
  b.logical_name = "text";
  b.size = kib(8);
  b.permissions = *permissions_from_string("kr+kx");
  reqs.push_back(b);
  Project p = parse_project("", kP1010Memmap, kP1010Mmu);
  MemoryLayout l = plan_layout(reqs, p.memmap, p.mmu);
  CHECK(build_sequences(l).empty());
}

TEST_CASE("sequences: two partitions share an identical kernel prefix") {
  Project p = parse_project(kPtRequirements, kP1010Memmap, kP1010Mmu);
  MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
  auto seqs = build_sequences(l);
  REQUIRE(seqs.size() == 2);
  std::size_t kernel_entries = 0;
  while (kernel_entries < seqs[0].entries.size() &&
         seqs[0].entries[kernel_entries].is_global())
    ++kernel_entries;
  CHECK(kernel_entries >= 2);
  for (std::size_t i = 0; i < kernel_entries; ++i) {
    CHECK(seqs[0].entries[i] == seqs[1].entries[i]);
    CHECK(seqs[0].encoded[i] == seqs[1].encoded[i]);
  }
}

TEST_CASE("sequence budget errors carry the accounting") {
  Project p = parse_project(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
  l.mmu.entry_count = 3;
  try {
    build_sequences(l);
    FAIL("expected BudgetError");
  } catch (const BudgetError& e) {
    CHECK(e.needed == 4);
    CHECK(e.budget == 3);
    CHECK(e.space == "P1");
  }
}

TEST_CASE("MLTC artifact round trip and corruption handling") {
  Project p = parse_project(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
  auto seqs = build_sequences(l);
  auto bytes = write_mltc(seqs);
  auto back = read_mltc(bytes);
  REQUIRE(back.size() == 1);
  CHECK(back[0].owner_id == 1);
  REQUIRE(back[0].entries.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back[0].entries[i] == seqs[0].encoded[i]);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(read_mltc(truncated), FormatError);

  auto wrong_version = bytes;
  wrong_version[4] = 2;
  CHECK_THROWS_AS(read_mltc(wrong_version), FormatError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(read_mltc(bad_magic), FormatError);
}

TEST_CASE("sequence coverage equals the plan mapping set") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Project p = random_project(base_seed() + 800 + seed);
    MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
    auto seqs = build_sequences(l);
    for (const auto& seq : seqs) {
      const AddressSpacePlan* plan = l.find_plan(seq.space);
      REQUIRE(plan);
      std::vector<MappingInterval> actual;
      for (const auto& e : seq.entries) {
        MappingInterval m;
        m.v0 = e.virtual_base;
        m.v1 = e.virtual_base + e.span();
        m.attr.phys = e.physical_base;
        m.attr.perms = e.permissions;
        m.attr.cache = e.cache_policy;
        m.attr.global = e.is_global();
        m.attr.tag = e.pid;
        actual.push_back(m);
      }
      CHECK(internal_overlaps(actual).empty());
      CHECK(mappings_equal(expected_intervals(l, *plan), actual, CompareFlags{}));
    }
  }
}
