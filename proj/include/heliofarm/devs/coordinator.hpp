#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "heliofarm/devs/model.hpp"

namespace heliofarm::devs {

class SimulationExhausted : public std::logic_error {
 public:
  SimulationExhausted() : std::logic_error("simulation exhausted: next event time is +infinity") {}
};

class IllegitimateModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CoordinatorOptions {
  std::uint64_t seed = 0;
  Timestamp epoch{};
  /// Cycles allowed at a single virtual instant before the model is declared illegitimate.
  std::uint64_t max_cycles_per_instant = 1'000'000;
  /// Worker threads used by simulate_until(); 1 runs cycle(), more runs parallel_cycle().
  std::size_t workers = 1;
  bool record_messages = false;
  /// Wall seconds per virtual second for paced runs; 0 runs as fast as possible.
  double real_time_scale = 0.0;
};

struct SimulationStats {
  std::uint64_t cycles = 0;
  std::uint64_t messages = 0;
  std::uint64_t transitions = 0;
  double wall_seconds = 0.0;
};

/// Flattening coordinator: the model hierarchy is reduced at construction to a
/// direct atomic-output -> atomic-input routing table.
class Coordinator {
 public:
  explicit Coordinator(Coupled& root, CoordinatorOptions options = {});
  ~Coordinator();

  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  SimTime next_time() const { return t_next_; }
  SimTime last_time() const { return t_last_; }

  /// One Parallel DEVS iteration at next_time(); returns the new next_time().
  SimTime cycle();
  /// Same trajectory as cycle(), with output and transition functions fanned out to `workers` threads.
  SimTime parallel_cycle(std::size_t workers);

  /// Runs cycles while next_time() <= t_end.
  SimulationStats simulate_until(SimTime t_end);

  /// Calls exit() on every atomic, in path order.
  void exit();

  const SimulationStats& stats() const { return stats_; }
  const std::vector<std::string>& message_log() const { return log_; }

  /// Atomics in path order.
  const std::vector<Atomic*>& atomics() const { return atomics_; }

  /// Atomic input ports reached from an atomic output port.
  std::vector<const PortBase*> destinations(const PortBase& out) const;

 private:
  struct Destination {
    PortBase* port;
    std::size_t atomic;
  };
  struct Route {
    PortBase* out;
    std::vector<Destination> to;
  };
  struct Slot {
    Atomic* model;
    SimTime t_last = 0.0;
    SimTime t_next = kInfinity;
    std::vector<Route> routes;  // output ports sorted by name
    bool receiving = false;
  };

  void validate(const Coupled& model, std::vector<std::string>& paths) const;
  void collect(Component& c);
  void build_routes();
  SimTime run_cycle(std::size_t workers);
  void apply_transition(Slot& slot, SimTime t);
  void for_each_index(std::span<const std::size_t> idx, std::size_t workers, auto&& fn);
  void update_next_time();

  Coupled& root_;
  CoordinatorOptions options_;
  std::vector<Slot> slots_;
  std::vector<Atomic*> atomics_;
  std::unordered_map<const PortBase*, std::size_t> owner_index_;
  std::vector<std::size_t> imminent_;
  std::vector<std::size_t> active_;
  SimTime t_next_ = kInfinity;
  SimTime t_last_ = 0.0;
  std::uint64_t cycles_at_instant_ = 0;
  SimulationStats stats_;
  std::vector<std::string> log_;
  struct Arena;
  std::unique_ptr<Arena> arena_;
};

}  // namespace heliofarm::devs
