#include "support/gen.hpp"

#include <cstdlib>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/project.hpp"
#include "layout/layout.hpp"

namespace memlayout::testing {

std::uint64_t base_seed() {
  const char* s = std::getenv("MEMLAYOUT_SEED");
  if (!s) return 0x6d656d6c61796f75ull;
  return std::strtoull(s, nullptr, 0);
}

namespace {

using Rng = std::mt19937_64;

std::uint64_t pick(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

Permissions perms_code_user() { return *permissions_from_string("ur+ux+kr+kx"); }
Permissions perms_data_user() { return *permissions_from_string("ur+uw+kr+kw"); }

Permissions random_perms(Rng& rng, bool user_space) {
  static const char* kernel_sets[] = {"kr", "kr+kw", "kr+kx"};
  static const char* user_sets[] = {"ur+kr", "ur+uw+kr+kw", "ur+ux+kr+kx", "ur+kr+kw"};
  if (user_space) return *permissions_from_string(user_sets[pick(rng, 0, 3)]);
  return *permissions_from_string(kernel_sets[pick(rng, 0, 2)]);
}

Project try_project(std::uint64_t seed, const GenOptions& opts) {
  Rng rng(seed);
  Project p;

  PhysicalRegion ram;
  ram.name = "ddr";
  ram.base = 0x10000000;
  ram.size = mib(pick(rng, 16, 64));
  ram.region_class = RegionClass::ExternalRam;
  ram.access_cost = 10;
  p.memmap.min_page_size = kib(4);
  p.memmap.regions.push_back(ram);
  bool internal = coin(rng, 0.6);
  if (internal) {
    PhysicalRegion sram;
    sram.name = "sram";
    sram.base = 0xF0000000;
    sram.size = kib(256 << pick(rng, 0, 2));
    sram.region_class = RegionClass::InternalRam;
    sram.access_cost = 2;
    p.memmap.regions.push_back(sram);
  }
  bool device_block = opts.allow_device && coin(rng, 0.3);
  if (device_block) {
    PhysicalRegion dev;
    dev.name = "uart";
    dev.base = 0xD0000000;
    dev.size = kib(64);
    dev.region_class = RegionClass::Device;
    dev.access_cost = 20;
    p.memmap.regions.push_back(dev);
  }

  if (opts.tlb) {
    p.mmu.kind = MmuModel::Kind::TlbFixed;
    p.mmu.entry_count = static_cast<unsigned>(pick(rng, 32, 64));
    p.mmu.min_entry_size = kib(4);
    p.mmu.max_entry_size = mib(16);
    p.mmu.pid_bits = 14;
  } else {
    p.mmu.kind = MmuModel::Kind::PageTable;
    PageTableGeometry g;
    if (coin(rng, 0.5)) {
      g.page_size = kib(4);
      g.levels = 4;
      g.index_bits = {9, 9, 9, 9};
      g.large_page_levels = {2, 3};
    } else {
      g.page_size = kib(4);
      g.levels = 3;
      g.index_bits = {9, 9, 9};
      g.large_page_levels = {2};
    }
    p.mmu.geometry = g;
    p.mmu.tlb_capacity = static_cast<unsigned>(pick(rng, 512, 1024));
    p.mmu.asid_bits = 16;
    p.mmu.has_global_bit = coin(rng, 0.9);
  }

  unsigned partitions = static_cast<unsigned>(pick(rng, 0, opts.max_partitions));
  std::vector<Owner> owners;
  for (unsigned i = 0; i < partitions; ++i)
    owners.push_back(Owner::partition("P" + std::to_string(i + 1)));

  auto block_size = [&](bool big_ok) -> Size {
    if (!opts.tlb && big_ok && coin(rng, 0.1)) return mib(2);  // large-page candidate
    if (coin(rng, 0.6)) return kib(4) << pick(rng, 0, 6);      // 4K..256K power of two
    return kib(4) * pick(rng, 1, 24);                          // arbitrary page multiple
  };

  auto add_block = [&](const Owner& o, const std::string& name, Size size,
                       Permissions perms) {
    MemoryBlockRequirement b;
    b.owner = o;
    b.logical_name = name;
    b.size = size;
    b.permissions = perms;
    b.cache_policy = CachePolicy::Normal;
    p.blocks.push_back(std::move(b));
    return p.blocks.size() - 1;
  };

  add_block(Owner::kernel(), "text", block_size(false), *permissions_from_string("kr+kx"));
  add_block(Owner::kernel(), "data", block_size(false), *permissions_from_string("kr+kw"));
  for (const auto& o : owners) {
    add_block(o, "text", block_size(false), perms_code_user());
    add_block(o, "data", block_size(true), perms_data_user());
  }
  unsigned budget = opts.max_blocks;
  unsigned have = static_cast<unsigned>(p.blocks.size());
  unsigned extras = have >= budget ? 0 : static_cast<unsigned>(pick(rng, 0, budget - have));
  for (unsigned i = 0; i < extras; ++i) {
    bool user_space = !owners.empty() && coin(rng, 0.7);
    Owner o = user_space ? owners[pick(rng, 0, owners.size() - 1)] : Owner::kernel();
    std::size_t idx = add_block(o, "pool" + std::to_string(i), block_size(true),
                                random_perms(rng, user_space));
    if (opts.allow_sharing && user_space && owners.size() >= 2 && coin(rng, 0.25)) {
      Owner other = owners[pick(rng, 0, owners.size() - 1)];
      if (!(other == o)) p.blocks[idx].shared_with.push_back(other);
    }
    if (opts.allow_fixed_addresses && coin(rng, 0.15)) {
      // Distinct slots high in RAM; unique per block, suitably aligned.
      Size align = std::max<Size>(backend_alignment(p.blocks[idx], p.memmap, p.mmu), kib(4));
      Addr base = ram.base + align_up(ram.size / 2, align) + i * mib(1);
      if (base + p.blocks[idx].size <= ram.end()) p.blocks[idx].physical_address = base;
    }
  }
  if (device_block) {
    MemoryBlockRequirement b;
    b.owner = Owner::kernel();
    b.logical_name = "uart";
    b.size = kib(4);
    b.physical_address = Addr{0xD0000000};
    b.permissions = *permissions_from_string("kr+kw");
    b.cache_policy = CachePolicy::Io;
    b.physically_contiguous = true;
    p.blocks.push_back(std::move(b));
  }
  return p;
}

}  // namespace

Project random_project(std::uint64_t seed, const GenOptions& opts) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Project p = try_project(seed + attempt * 0x9E3779B97F4A7C15ull, opts);
    if (!validate_requirements(p.blocks, p.memmap, p.mmu).passed()) continue;
    try {
      plan_layout(p.blocks, p.memmap, p.mmu);
      return p;
    } catch (const Error&) {
      continue;
    }
  }
}

}  // namespace memlayout::testing
