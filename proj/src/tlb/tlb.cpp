#include "tlb/tlb.hpp"

#include <algorithm>

#include "core/error.hpp"
#include "core/interchange.hpp"

namespace memlayout {

namespace {

constexpr std::uint32_t kValidBit = 1u << 11;
constexpr std::uint32_t kGlobalBit = 1u << 31;
constexpr std::uint32_t kPidMask = (1u << 14) - 1;
constexpr std::uint32_t kCoherentBit = 1u << 3;

std::uint32_t cache_code(CachePolicy c) {
  switch (c) {
    case CachePolicy::Normal: return 0;
    case CachePolicy::NormalCoherent: return 0 | kCoherentBit;
    case CachePolicy::Io: return 1;
    case CachePolicy::WriteThrough: return 2;
    case CachePolicy::Uncached: return 3;
  }
  return 0;
}

CachePolicy cache_from_code(std::uint32_t word3) {
  std::uint32_t code = word3 & 0x7;
  bool coherent = (word3 & kCoherentBit) != 0;
  if (coherent && code != 0)
    throw DecodeError("word3: coherent flag combined with cache code " + std::to_string(code));
  switch (code) {
    case 0: return coherent ? CachePolicy::NormalCoherent : CachePolicy::Normal;
    case 1: return CachePolicy::Io;
    case 2: return CachePolicy::WriteThrough;
    case 3: return CachePolicy::Uncached;
    default: throw DecodeError("word3: unknown cache code " + std::to_string(code));
  }
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  void expect_magic(const char* magic) {
    need(4);
    for (int i = 0; i < 4; ++i)
      if (bytes_[pos_ + i] != static_cast<std::uint8_t>(magic[i]))
        throw FormatError(std::string("bad magic, expected ") + magic);
    pos_ += 4;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated artifact");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<TlbEntry> decompose_block(const ResolvedBlock& block, const MmuModel& mmu) {
  auto chunks = decompose_range(block.virtual_address, block.physical_address, block.size,
                                mmu.min_entry_size, mmu.max_entry_size);
  std::vector<TlbEntry> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) {
    TlbEntry e;
    e.virtual_base = c.virtual_base;
    e.physical_base = c.physical_base;
    e.log2_size = c.log2_size;
    e.permissions = block.permissions;
    e.cache_policy = block.cache_policy;
    e.pid = 0;
    e.valid = true;
    out.push_back(e);
  }
  return out;
}

std::vector<TlbSequence> build_sequences(const MemoryLayout& layout) {
  if (!layout.mmu.is_tlb())
    throw Error(ErrorCode::BackendMismatch, "layout targets a page-table MMU");
  std::vector<TlbSequence> sequences;
  for (const auto& plan : layout.plans) {
    if (plan.space.is_kernel()) continue;
    TlbSequence seq;
    seq.space = plan.space;
    seq.owner_id = layout.space_id(plan.space);
    std::vector<TlbEntry> kernel_entries;
    std::vector<TlbEntry> own_entries;
    for (const auto& pe : plan.entries) {
      const ResolvedBlock& rb = layout.block_of(pe);
      auto chunks = decompose_range(pe.virtual_address, rb.physical_address, rb.size,
                                    layout.mmu.min_entry_size, layout.mmu.max_entry_size);
      for (const auto& c : chunks) {
        TlbEntry e;
        e.virtual_base = c.virtual_base;
        e.physical_base = c.physical_base;
        e.log2_size = c.log2_size;
        e.permissions = rb.permissions;
        e.cache_policy = rb.cache_policy;
        e.pid = rb.owner.is_kernel() ? 0 : seq.owner_id;
        e.valid = true;
        (rb.owner.is_kernel() ? kernel_entries : own_entries).push_back(e);
      }
    }
    auto by_vbase = [](const TlbEntry& a, const TlbEntry& b) {
      return a.virtual_base < b.virtual_base;
    };
    std::sort(kernel_entries.begin(), kernel_entries.end(), by_vbase);
    std::sort(own_entries.begin(), own_entries.end(), by_vbase);
    seq.entries = std::move(kernel_entries);
    seq.entries.insert(seq.entries.end(), own_entries.begin(), own_entries.end());
    if (seq.entries.size() > layout.mmu.entry_count)
      throw BudgetError(seq.space.key(), static_cast<unsigned>(seq.entries.size()),
                        layout.mmu.entry_count,
                        "space " + seq.space.key() + " needs " +
                            std::to_string(seq.entries.size()) + " TLB entries, model has " +
                            std::to_string(layout.mmu.entry_count));
    for (const auto& e : seq.entries) seq.encoded.push_back(encode_entry(e, layout.mmu.pid_bits));
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

EncodedTlbEntry encode_entry(const TlbEntry& e, unsigned pid_bits) {
  if (e.log2_size < 12 || e.log2_size > 32)
    throw RangeError("entry size 2^" + std::to_string(e.log2_size) +
                     " is not encodable (12..32)");
  Size span = e.span();
  if (e.virtual_base % span != 0 || e.physical_base % span != 0)
    throw RangeError("entry bases must be aligned by the entry size");
  if (e.virtual_base + span > (Addr{1} << 32))
    throw RangeError("virtual base " + hex(e.virtual_base) + " exceeds the 32-bit space");
  if (e.physical_base + span > (Addr{1} << 36))
    throw RangeError("physical base " + hex(e.physical_base) + " exceeds the 36-bit space");
  if (pid_bits > 14) pid_bits = 14;
  if (e.pid >= (1u << pid_bits))
    throw RangeError("pid " + std::to_string(e.pid) + " exceeds " + std::to_string(pid_bits) +
                     " bits");
  EncodedTlbEntry w;
  w.words[0] = static_cast<std::uint32_t>(e.virtual_base & 0xFFFFF000u) |
               (e.valid ? kValidBit : 0) | (e.log2_size & 0x3Fu);
  w.words[1] = static_cast<std::uint32_t>(e.physical_base & 0xFFFFF000u) |
               static_cast<std::uint32_t>((e.physical_base >> 32) & 0xFu);
  w.words[2] = e.permissions.bits();
  w.words[3] = cache_code(e.cache_policy);
  w.words[4] = (e.pid & kPidMask) | (e.is_global() ? kGlobalBit : 0);
  return w;
}

TlbEntry decode_entry(const EncodedTlbEntry& w) {
  if (w.words[0] & 0x7C0u) throw DecodeError("word0: reserved bits 10:6 set");
  if (w.words[1] & 0xFF0u) throw DecodeError("word1: reserved bits 11:4 set");
  if (w.words[2] & ~0x3Fu) throw DecodeError("word2: reserved bits 31:6 set");
  if (w.words[3] & ~0xFu) throw DecodeError("word3: reserved bits 31:4 set");
  if (w.words[4] & ~(kGlobalBit | kPidMask)) throw DecodeError("word4: reserved bits 30:14 set");

  TlbEntry e;
  e.log2_size = w.words[0] & 0x3Fu;
  if (e.log2_size < 12 || e.log2_size > 32)
    throw DecodeError("word0: entry size 2^" + std::to_string(e.log2_size) + " out of range");
  e.valid = (w.words[0] & kValidBit) != 0;
  e.virtual_base = w.words[0] & 0xFFFFF000u;
  e.physical_base =
      (static_cast<Addr>(w.words[1] & 0xFu) << 32) | (w.words[1] & 0xFFFFF000u);
  Size span = e.span();
  if (e.virtual_base % span != 0 || e.physical_base % span != 0)
    throw DecodeError("entry bases are not aligned by the entry size");
  if (e.virtual_base + span > (Addr{1} << 32))
    throw DecodeError("entry crosses the 32-bit virtual boundary");
  e.permissions = Permissions::from_bits(w.words[2]);
  e.cache_policy = cache_from_code(w.words[3]);
  e.pid = w.words[4] & kPidMask;
  bool global = (w.words[4] & kGlobalBit) != 0;
  if (global != e.is_global())
    throw DecodeError("word4: global flag disagrees with the pid field");
  return e;
}

std::vector<std::uint8_t> write_mltc(const std::vector<TlbSequence>& sequences) {
  std::vector<std::uint8_t> out{'M', 'L', 'T', 'C'};
  append_u16(out, 1);
  if (sequences.size() > 0xFFFF) throw RangeError("too many sequences");
  append_u16(out, static_cast<std::uint16_t>(sequences.size()));
  for (const auto& s : sequences) {
    if (s.owner_id > 0xFFFF) throw RangeError("owner id exceeds 16 bits");
    if (s.encoded.size() > 0xFFFF) throw RangeError("sequence too long");
    append_u16(out, static_cast<std::uint16_t>(s.owner_id));
    append_u16(out, static_cast<std::uint16_t>(s.encoded.size()));
    for (const auto& e : s.encoded)
      for (std::uint32_t word : e.words) append_u32(out, word);
  }
  return out;
}

std::vector<MltcSequence> read_mltc(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_magic("MLTC");
  std::uint16_t version = r.u16();
  if (version != 1) throw FormatError("unsupported MLTC version " + std::to_string(version));
  std::uint16_t count = r.u16();
  std::vector<MltcSequence> out;
  std::size_t offset = 8;  // magic + version + count
  for (std::uint16_t i = 0; i < count; ++i) {
    MltcSequence s;
    s.owner_id = r.u16();
    std::uint16_t entries = r.u16();
    offset += 4;
    s.file_offset = offset;
    offset += static_cast<std::size_t>(entries) * 20;
    for (std::uint16_t k = 0; k < entries; ++k) {
      EncodedTlbEntry e;
      for (auto& word : e.words) word = r.u32();
      s.entries.push_back(e);
    }
    out.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after the last sequence");
  return out;
}

std::string mltc_manifest(const std::vector<TlbSequence>& sequences,
                          const MemoryLayout& layout) {
  Json j;
  j["format"] = "memlayout/mltc-manifest";
  j["version"] = 1;
  j["mmu"] = to_json(layout.mmu);
  Json seqs = Json::array();
  for (const auto& s : sequences) {
    Json sj;
    sj["owner_id"] = s.owner_id;
    sj["space"] = s.space.key();
    sj["entry_count"] = s.entries.size();
    Json entries = Json::array();
    for (const auto& e : s.entries) {
      Json ej;
      ej["virtual_base"] = addr_json(e.virtual_base);
      ej["physical_base"] = addr_json(e.physical_base);
      ej["log2_size"] = e.log2_size;
      ej["permissions"] = to_string(e.permissions);
      ej["cache_policy"] = to_string(e.cache_policy);
      ej["pid"] = e.pid;
      entries.push_back(std::move(ej));
    }
    sj["entries"] = std::move(entries);
    seqs.push_back(std::move(sj));
  }
  j["sequences"] = std::move(seqs);
  return j.dump(2) + "\n";
}

}  // namespace memlayout
