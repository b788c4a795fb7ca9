#include "verify/mutate.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "core/error.hpp"
#include "dynamic/dynamic.hpp"
#include "verify/intervals.hpp"
#include "verify/static_verify.hpp"

namespace memlayout {

namespace {

// Access-outcome projection of one space: intervals that translate, with
// physical target and permission bits.  Mappings granting nothing behave
// exactly like unmapped space (every access faults), so they are dropped.
using Projection = std::map<std::string, std::vector<MappingInterval>>;

Projection project(const MmuConfig& config, const MemoryLayout& layout, bool& load_fails) {
  Projection out;
  load_fails = false;
  auto partitions = layout.partitions();
  if (config.is_tlb()) {
    for (const auto& seq : config.tlb_sequences) {
      if (seq.owner_id == 0 || seq.owner_id > partitions.size()) continue;
      std::vector<MappingInterval>& set = out[partitions[seq.owner_id - 1].key()];
      for (const auto& raw : seq.entries) {
        TlbEntry e;
        try {
          e = decode_entry(raw);
        } catch (const DecodeError&) {
          load_fails = true;  // the simulator cannot load this sequence
          return out;
        }
        if (!e.valid) continue;
        if (!e.is_global() && e.pid != seq.owner_id) continue;  // invisible in this space
        if (!e.permissions.any()) continue;
        MappingInterval m;
        m.v0 = e.virtual_base;
        m.v1 = e.virtual_base + e.span();
        m.attr.phys = e.physical_base;
        m.attr.perms = e.permissions;
        set.push_back(std::move(m));
      }
    }
  } else {
    for (const auto& s : config.pagetable->spaces) {
      if (s.owner_id > partitions.size()) continue;
      std::string key = s.owner_id == 0 ? "kernel" : partitions[s.owner_id - 1].key();
      PageTableImage img;
      img.root_physical = s.image_base + s.root_offset;
      img.image_base = s.image_base;
      img.bytes = s.bytes;
      std::vector<MappingInterval>& set = out[key];
      for (const auto& m : lenient_mappings(img, layout.mmu.geometry)) {
        if (!m.permissions.any()) continue;
        MappingInterval mi;
        mi.v0 = m.virtual_base;
        mi.v1 = m.virtual_base + m.size;
        mi.attr.phys = m.physical_base;
        mi.attr.perms = m.permissions;
        set.push_back(std::move(mi));
      }
    }
  }
  return out;
}

bool projections_equal(const Projection& a, const Projection& b) {
  if (a.size() != b.size()) return false;
  CompareFlags flags;
  flags.cache = false;
  flags.global_flag = false;
  flags.tag = false;
  for (const auto& [key, set] : a) {
    auto it = b.find(key);
    if (it == b.end()) return false;
    if (!mappings_equal(set, it->second, flags)) return false;
  }
  return true;
}

bool classify_dynamic(const std::vector<std::uint8_t>& mutated_bytes,
                      const MemoryLayout& layout, const Projection& baseline) {
  MmuConfig mutated;
  try {
    mutated = MmuConfig::from_bytes(mutated_bytes);
  } catch (const Error&) {
    return true;  // agent fails to load: the dynamic run itself flags it
  }
  bool load_fails = false;
  Projection p = project(mutated, layout, load_fails);
  if (load_fails) return true;
  return !projections_equal(baseline, p);
}

// Reachable descriptor words of one page-table image, by walking table
// pointers the way the decoder does.
void collect_descriptor_offsets(const MlptSpace& s, const PageTableGeometry& g,
                                Addr table_phys, unsigned level,
                                std::set<std::size_t>& used_offsets,
                                std::set<std::size_t>& empty_offsets) {
  Size bytes = g.table_bytes(level);
  if (table_phys < s.image_base || table_phys + bytes > s.image_base + s.bytes->size()) return;
  std::size_t base = table_phys - s.image_base;
  bool first_empty_seen = false;
  std::size_t slots = Size{1} << g.index_bits[level - 1];
  for (std::size_t i = 0; i < slots; ++i) {
    std::uint64_t d = 0;
    for (int byte = 0; byte < 8; ++byte)
      d |= static_cast<std::uint64_t>((*s.bytes)[base + i * 8 + byte]) << (8 * byte);
    if (d == 0) {
      if (!first_empty_seen) {
        empty_offsets.insert(base + i * 8);
        first_empty_seen = true;
      }
      continue;
    }
    used_offsets.insert(base + i * 8);
    if ((d & desc::kValid) && (d & desc::kTable) && level < g.levels)
      collect_descriptor_offsets(s, g, d & desc::kAddrMask, level + 1, used_offsets,
                                 empty_offsets);
  }
}

}  // namespace

std::vector<MutationSite> enumerate_mutation_sites(const MmuConfig& config,
                                                   const MemoryLayout& layout) {
  std::vector<MutationSite> sites;
  bool ignore = false;
  Projection baseline = project(config, layout, ignore);

  auto add_site = [&](std::vector<std::size_t> word_offsets, unsigned bit_in_word,
                      const std::string& what) {
    MutationSite site;
    for (std::size_t off : word_offsets) site.byte_offsets.push_back(off + bit_in_word / 8);
    site.bit = bit_in_word % 8;
    site.what = what;
    std::vector<std::uint8_t> mutated = config.bytes;
    for (std::size_t off : site.byte_offsets)
      mutated[off] ^= static_cast<std::uint8_t>(1u << site.bit);
    site.dynamic_expected = classify_dynamic(mutated, layout, baseline);
    sites.push_back(std::move(site));
  };

  if (config.is_tlb()) {
    for (std::size_t si = 0; si < config.tlb_sequences.size(); ++si) {
      const MltcSequence& seq = config.tlb_sequences[si];
      for (std::size_t k = 0; k < seq.entries.size(); ++k) {
        for (unsigned w = 0; w < 5; ++w) {
          for (unsigned b = 0; b < 32; ++b) {
            add_site({seq.file_offset + k * 20 + w * 4}, b,
                     "seq" + std::to_string(seq.owner_id) + "/entry" + std::to_string(k) +
                         "/word" + std::to_string(w) + "/bit" + std::to_string(b));
          }
        }
      }
    }
  } else {
    // A descriptor is one word of the shared physical arena; every space
    // carries an image of it, so the fault lands in all of them.
    const PageTableGeometry& g = layout.mmu.geometry;
    std::set<std::size_t> used, empty;
    for (const auto& s : config.pagetable->spaces)
      collect_descriptor_offsets(s, g, s.image_base + s.root_offset, 1, used, empty);
    for (auto it = empty.begin(); it != empty.end();)
      it = used.count(*it) ? empty.erase(it) : std::next(it);
    auto file_offsets = [&](std::size_t arena_off) {
      std::vector<std::size_t> out;
      for (const auto& s : config.pagetable->spaces)
        if (arena_off + 8 <= s.bytes->size()) out.push_back(s.file_offset + arena_off);
      return out;
    };
    for (std::size_t off : used)
      for (unsigned b = 0; b < 64; ++b)
        add_site(file_offsets(off), b,
                 "arena/desc@" + std::to_string(off) + "/bit" + std::to_string(b));
    // A sample of bits in one empty slot per table: valid, table, an address
    // bit, a permission bit, and the top reserved bit.
    for (std::size_t off : empty)
      for (unsigned b : {0u, 1u, 12u, 53u, 63u})
        add_site(file_offsets(off), b,
                 "arena/empty@" + std::to_string(off) + "/bit" + std::to_string(b));
  }
  return sites;
}

MutationCampaign run_mutation_campaign(const MmuConfig& config, const MemoryLayout& layout,
                                       std::size_t max_mutations, std::uint64_t seed) {
  MutationCampaign campaign;
  std::vector<MutationSite> sites = enumerate_mutation_sites(config, layout);
  campaign.sites_total = sites.size();
  if (max_mutations != 0 && sites.size() > max_mutations) {
    std::mt19937_64 rng(seed);
    std::shuffle(sites.begin(), sites.end(), rng);
    sites.resize(max_mutations);
  }

  AccessMatrix matrix = build_matrix(layout);
  for (const auto& site : sites) {
    std::vector<std::uint8_t> bytes = config.bytes;
    for (std::size_t off : site.byte_offsets)
      bytes[off] ^= static_cast<std::uint8_t>(1u << site.bit);

    MutationOutcome outcome;
    outcome.site = site;
    try {
      MmuConfig mutated = MmuConfig::from_bytes(bytes);
      outcome.static_detected = !verify_mmu_config(mutated, layout).passed();
    } catch (const Error&) {
      outcome.static_detected = true;
    }
    if (site.dynamic_expected) {
      try {
        MmuConfig mutated = MmuConfig::from_bytes(bytes);
        SimAgent agent(mutated, layout);
        outcome.dynamic_detected = !run_matrix(matrix, agent, true).passed();
      } catch (const Error&) {
        outcome.dynamic_detected = true;  // the agent could not even start
      }
    }
    ++campaign.tested;
    if (!outcome.ok()) {
      ++campaign.escaped;
      campaign.failures.push_back(outcome);
    }
  }
  return campaign;
}

}  // namespace memlayout
