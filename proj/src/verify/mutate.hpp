#ifndef MEMLAYOUT_VERIFY_MUTATE_HPP
#define MEMLAYOUT_VERIFY_MUTATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "config/mmu_config.hpp"
#include "core/report.hpp"
#include "layout/layout.hpp"

namespace memlayout {

// One meaningful single-bit fault-injection point in an artifact.
// Meaningful positions are every bit of every encoded TLB entry word and
// every bit of the page-table descriptors a walk can reach (plus a sample of
// bits in empty slots); header and structural fields are exercised by the
// format tests instead.
struct MutationSite {
  // Every artifact byte the flip lands on.  TLB entry words live in exactly
  // one place; a page-table descriptor is one physical arena word, so the
  // flip is applied to its image in every space, the way a real memory fault
  // would hit it.
  std::vector<std::size_t> byte_offsets;
  unsigned bit = 0;
  std::string what;
  // True when the flip changes what the hardware would translate (presence,
  // physical address or permissions of some page).  Cache policy, global and
  // retention attributes are invisible to access outcomes and only static
  // verification can catch them.
  bool dynamic_expected = false;
};

std::vector<MutationSite> enumerate_mutation_sites(const MmuConfig& config,
                                                   const MemoryLayout& layout);

struct MutationOutcome {
  MutationSite site;
  bool static_detected = false;
  bool dynamic_detected = false;
  bool ok() const { return static_detected && (!site.dynamic_expected || dynamic_detected); }
};

struct MutationCampaign {
  std::size_t sites_total = 0;
  std::size_t tested = 0;
  std::size_t escaped = 0;  // mutations some required detector missed
  std::vector<MutationOutcome> failures;
  bool all_detected() const { return escaped == 0; }
};

// Flips each site (all of them, or a seeded sample of max_mutations) and
// requires static verification to flag every one, and the dynamic matrix to
// flag every translation-visible one.
MutationCampaign run_mutation_campaign(const MmuConfig& config, const MemoryLayout& layout,
                                       std::size_t max_mutations, std::uint64_t seed);

}  // namespace memlayout

#endif
