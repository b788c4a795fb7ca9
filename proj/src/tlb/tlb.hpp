#ifndef MEMLAYOUT_TLB_TLB_HPP
#define MEMLAYOUT_TLB_TLB_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "layout/layout.hpp"
#include "tlb/decompose.hpp"

namespace memlayout {

// One manually written TLB entry.  pid 0 marks a global entry, valid in
// every address space.
struct TlbEntry {
  Addr virtual_base = 0;
  Addr physical_base = 0;
  unsigned log2_size = 12;
  Permissions permissions;
  CachePolicy cache_policy = CachePolicy::Normal;
  unsigned pid = 0;
  bool valid = true;

  bool is_global() const { return pid == 0; }
  Size span() const { return Size{1} << log2_size; }
  bool operator==(const TlbEntry&) const = default;
};

// Native register image of one entry: five 32-bit words, little-endian in
// the artifact.
//   word0  vaddr[31:12]<<12 | valid<<11 | log2_size in bits 5:0
//   word1  paddr[31:12]<<12 | paddr[35:32] in bits 3:0
//   word2  permission bits UR,UW,UX,KR,KW,KX in bits 0..5
//   word3  cache policy code in bits 2:0, coherent flag in bit 3
//   word4  pid in bits 13:0, global flag in bit 31
// All remaining bits are reserved and must be zero.
struct EncodedTlbEntry {
  std::array<std::uint32_t, 5> words{};
  bool operator==(const EncodedTlbEntry&) const = default;
};

struct TlbSequence {
  Owner space;
  unsigned owner_id = 0;  // partition identifier, used as the entry PID
  std::vector<TlbEntry> entries;
  std::vector<EncodedTlbEntry> encoded;
};

// Splits a resolved block into the minimal list of size-aligned power-of-two
// entries covering it exactly.  Entries carry the block's permissions and
// cache policy; the PID is assigned later by build_sequences.
std::vector<TlbEntry> decompose_block(const ResolvedBlock& block, const MmuModel& mmu);

// One sequence per partition: all kernel entries first (global), then the
// partition's own entries, both ordered by virtual base.  Throws BudgetError
// when a sequence exceeds the model's entry count.
std::vector<TlbSequence> build_sequences(const MemoryLayout& layout);

EncodedTlbEntry encode_entry(const TlbEntry& e, unsigned pid_bits = 14);
TlbEntry decode_entry(const EncodedTlbEntry& w);

// MLTC artifact: magic "MLTC", u16 version, u16 sequence count, then per
// sequence {u16 owner id, u16 entry count, entries as 5 x u32 LE words}.
std::vector<std::uint8_t> write_mltc(const std::vector<TlbSequence>& sequences);

struct MltcSequence {
  unsigned owner_id = 0;
  std::vector<EncodedTlbEntry> entries;
  std::size_t file_offset = 0;  // offset of the first entry word in the artifact
};
std::vector<MltcSequence> read_mltc(const std::vector<std::uint8_t>& bytes);

// Human/diff-oriented manifest in the canonical interchange form.
std::string mltc_manifest(const std::vector<TlbSequence>& sequences, const MemoryLayout& layout);

}  // namespace memlayout

#endif
