#include "heliofarm/devs/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/task_arena.h>

namespace heliofarm::devs {

struct Coordinator::Arena {
  explicit Arena(std::size_t n) : workers(n), arena(static_cast<int>(n)) {}
  std::size_t workers;
  tbb::task_arena arena;
};

Coordinator::Coordinator(Coupled& root, CoordinatorOptions options) : root_(root), options_(options) {
  if (options_.workers == 0) throw std::invalid_argument("workers must be >= 1");
  std::vector<std::string> paths;
  validate(root_, paths);
  std::sort(paths.begin(), paths.end());
  if (auto dup = std::adjacent_find(paths.begin(), paths.end()); dup != paths.end()) {
    throw ValidationError(fmt::format("duplicate component id '{}'", *dup));
  }

  collect(root_);
  std::sort(atomics_.begin(), atomics_.end(), [](const Atomic* a, const Atomic* b) { return a->path() < b->path(); });
  slots_.reserve(atomics_.size());
  for (std::size_t i = 0; i < atomics_.size(); ++i) {
    Atomic& m = *atomics_[i];
    slots_.emplace_back().model = &m;
    for (PortBase* in : m.inputs()) owner_index_[in] = i;
    m.epoch_ = options_.epoch;
    m.rng_.seed(derive_seed(options_.seed, m.path()));
    m.now_ = 0.0;
    m.initialize();
    const SimTime ta = m.ta();
    if (!(ta >= 0.0)) throw IllegitimateModel(fmt::format("negative time advance in '{}'", m.path()));
    slots_[i].t_next = ta;
  }
  build_routes();
  update_next_time();
}

Coordinator::~Coordinator() = default;

void Coordinator::validate(const Coupled& model, std::vector<std::string>& paths) const {
  std::set<const Component*> children;
  for (const auto& child : model.children()) {
    children.insert(child.get());
    paths.push_back(child->path());
  }
  auto is_child = [&](const Component* c) { return children.count(c) != 0; };

  for (const auto& [from, to] : model.couplings()) {
    const Component* src = &from->owner();
    const Component* dst = &to->owner();
    if (src != &model && !is_child(src)) {
      throw ValidationError(
          fmt::format("dangling coupling endpoint '{}' in '{}'", from->qualified_name(), model.path()));
    }
    if (dst != &model && !is_child(dst)) {
      throw ValidationError(fmt::format("dangling coupling endpoint '{}' in '{}'", to->qualified_name(), model.path()));
    }
    if (from->payload_type() != to->payload_type()) {
      throw ValidationError(
          fmt::format("payload type mismatch on coupling '{}' -> '{}'", from->qualified_name(), to->qualified_name()));
    }
    const bool eic = src == &model;
    const bool eoc = dst == &model;
    if (eic && eoc) {
      throw ValidationError(
          fmt::format("coupling '{}' -> '{}' bypasses every component", from->qualified_name(), to->qualified_name()));
    }
    const Direction want_from = eic ? Direction::input : Direction::output;
    const Direction want_to = eoc ? Direction::output : Direction::input;
    if (from->direction() != want_from || to->direction() != want_to) {
      throw ValidationError(
          fmt::format("coupling '{}' -> '{}' has wrong port directions", from->qualified_name(), to->qualified_name()));
    }
    if (!eic && !eoc && src == dst) {
      throw ValidationError(fmt::format("zero-delay self-loop on '{}'", src->path()));
    }
  }
  for (const auto& child : model.children()) {
    if (!child->is_atomic()) validate(static_cast<const Coupled&>(*child), paths);
  }
}

void Coordinator::collect(Component& c) {
  if (c.is_atomic()) {
    atomics_.push_back(static_cast<Atomic*>(&c));
    return;
  }
  for (const auto& child : static_cast<Coupled&>(c).children()) collect(*child);
}

void Coordinator::build_routes() {
  std::unordered_map<const PortBase*, std::vector<PortBase*>> links;
  auto gather = [&](auto&& self, const Coupled& m) -> void {
    for (const auto& [from, to] : m.couplings()) links[from].push_back(to);
    for (const auto& child : m.children()) {
      if (!child->is_atomic()) self(self, static_cast<const Coupled&>(*child));
    }
  };
  gather(gather, root_);

  for (auto& slot : slots_) {
    std::vector<PortBase*> outs = slot.model->outputs();
    std::sort(outs.begin(), outs.end(), [](const PortBase* a, const PortBase* b) { return a->name() < b->name(); });
    for (PortBase* out : outs) {
      Route route{out, {}};
      std::set<const PortBase*> seen;
      auto walk = [&](auto&& self, const PortBase* p) -> void {
        auto it = links.find(p);
        if (it == links.end()) return;
        for (PortBase* next : it->second) {
          if (next->owner().is_atomic()) {
            route.to.push_back({next, owner_index_.at(next)});
          } else if (seen.insert(next).second) {
            self(self, next);
          }
        }
      };
      walk(walk, out);
      if (!route.to.empty()) slot.routes.push_back(std::move(route));
    }
  }
}

std::vector<const PortBase*> Coordinator::destinations(const PortBase& out) const {
  std::vector<const PortBase*> result;
  for (const auto& slot : slots_) {
    for (const auto& route : slot.routes) {
      if (route.out != &out) continue;
      for (const auto& d : route.to) result.push_back(d.port);
    }
  }
  return result;
}

void Coordinator::update_next_time() {
  SimTime t = kInfinity;
  for (const auto& slot : slots_) t = std::min(t, slot.t_next);
  t_next_ = t;
}

void Coordinator::for_each_index(std::span<const std::size_t> idx, std::size_t workers, auto&& fn) {
  if (workers <= 1 || idx.size() <= 1) {
    for (std::size_t i : idx) fn(i);
    return;
  }
  if (!arena_ || arena_->workers != workers) arena_ = std::make_unique<Arena>(workers);
  arena_->arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, idx.size(), 1), [&](const tbb::blocked_range<std::size_t>& r) {
      for (std::size_t k = r.begin(); k != r.end(); ++k) fn(idx[k]);
    });
  });
}

void Coordinator::apply_transition(Slot& slot, SimTime t) {
  Atomic& m = *slot.model;
  m.now_ = t;
  const bool imminent = slot.t_next == t;
  if (imminent && slot.receiving) {
    m.delta_con();
    ++m.counts_.confluent;
  } else if (imminent) {
    m.delta_int();
    ++m.counts_.internal;
  } else {
    const SimTime elapsed = t - slot.t_last;
    if (!(elapsed >= 0.0 && elapsed < slot.t_next - slot.t_last)) {
      throw std::logic_error(fmt::format("elapsed time {} out of range for '{}'", elapsed, m.path()));
    }
    m.delta_ext(elapsed);
    ++m.counts_.external;
  }
  const SimTime ta = m.ta();
  if (!(ta >= 0.0)) throw IllegitimateModel(fmt::format("negative time advance in '{}'", m.path()));
  slot.t_last = t;
  slot.t_next = t + ta;
}

SimTime Coordinator::run_cycle(std::size_t workers) {
  if (t_next_ == kInfinity) throw SimulationExhausted();
  const SimTime t = t_next_;
  if (stats_.cycles > 0 && t == t_last_) {
    if (++cycles_at_instant_ >= options_.max_cycles_per_instant) {
      throw IllegitimateModel(
          fmt::format("illegitimate model: more than {} cycles at t={}", options_.max_cycles_per_instant, t));
    }
  } else {
    cycles_at_instant_ = 0;
  }

  imminent_.clear();
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].t_next == t) imminent_.push_back(i);
  }

  for_each_index(imminent_, workers, [&](std::size_t i) {
    Atomic& m = *slots_[i].model;
    m.now_ = t;
    m.lambda();
    ++m.counts_.lambda;
  });

  active_ = imminent_;
  for (std::size_t i : imminent_) {
    for (const Route& route : slots_[i].routes) {
      const std::size_t n = route.out->size();
      for (std::size_t k = 0; k < n; ++k) {
        for (const Destination& d : route.to) {
          d.port->append_from(*route.out, k);
          ++stats_.messages;
          Slot& dst = slots_[d.atomic];
          if (!dst.receiving) {
            dst.receiving = true;
            if (dst.t_next != t) active_.push_back(d.atomic);
          }
          if (options_.record_messages) {
            log_.push_back(fmt::format("{:.3f} {}#{} -> {} {}", t, route.out->qualified_name(), k,
                                       d.port->qualified_name(), route.out->describe(k)));
          }
        }
      }
    }
    for (PortBase* out : slots_[i].model->outputs()) out->clear();
  }
  std::sort(active_.begin(), active_.end());

  for_each_index(active_, workers, [&](std::size_t i) { apply_transition(slots_[i], t); });

  for (std::size_t i : active_) {
    Slot& slot = slots_[i];
    for (PortBase* in : slot.model->inputs()) in->clear();
    for (PortBase* out : slot.model->outputs()) out->clear();
    slot.receiving = false;
  }
  stats_.transitions += active_.size();
  ++stats_.cycles;
  t_last_ = t;
  update_next_time();
  return t_next_;
}

SimTime Coordinator::cycle() { return run_cycle(1); }

SimTime Coordinator::parallel_cycle(std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("workers must be >= 1");
  return run_cycle(workers);
}

SimulationStats Coordinator::simulate_until(SimTime t_end) {
  if (t_end < t_last_) throw std::invalid_argument("t_end precedes the current simulation time");
  using clock = std::chrono::steady_clock;
  const auto wall_start = clock::now();
  const SimTime sim_start = t_last_;
  while (t_next_ != kInfinity && t_next_ <= t_end) {
    if (options_.real_time_scale > 0.0) {
      const auto target = wall_start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(
                                           (t_next_ - sim_start) * options_.real_time_scale));
      std::this_thread::sleep_until(target);
    }
    run_cycle(options_.workers);
  }
  stats_.wall_seconds += std::chrono::duration<double>(clock::now() - wall_start).count();
  return stats_;
}

void Coordinator::exit() {
  for (Atomic* m : atomics_) m->exit();
}

}  // namespace heliofarm::devs
