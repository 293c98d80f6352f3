#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "heliofarm/core/time.hpp"
#include "heliofarm/devs/port.hpp"

namespace heliofarm::devs {

/// Virtual seconds since the simulation epoch.
using SimTime = double;
inline constexpr SimTime kInfinity = std::numeric_limits<double>::infinity();

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Component {
 public:
  explicit Component(std::string name);
  virtual ~Component() = default;

  Component(const Component&) = delete;
  Component& operator=(const Component&) = delete;

  const std::string& name() const { return name_; }
  Component* parent() const { return parent_; }

  /// Dotted path from the root's children downwards; the root itself maps to its name.
  std::string path() const;

  const std::vector<PortBase*>& inputs() const { return inputs_; }
  const std::vector<PortBase*>& outputs() const { return outputs_; }

  virtual bool is_atomic() const = 0;

 private:
  friend class PortBase;
  friend class Coupled;

  std::string name_;
  Component* parent_ = nullptr;
  std::vector<PortBase*> inputs_;
  std::vector<PortBase*> outputs_;
};

class Coordinator;

/// Parallel DEVS atomic model. Subclasses keep their state as members, read
/// inputs from their InPorts in the transition functions and write outputs to
/// their OutPorts in lambda(). ta() defaults to the sigma set by hold_in().
class Atomic : public Component {
 public:
  using Component::Component;

  bool is_atomic() const final { return true; }

  virtual void initialize() {}
  virtual void exit() {}

  virtual SimTime ta() const { return sigma_; }
  virtual void lambda() = 0;
  virtual void delta_int() = 0;
  virtual void delta_ext(SimTime elapsed) = 0;
  virtual void delta_con() {
    delta_int();
    delta_ext(0.0);
  }

  /// Virtual time of the transition being executed.
  SimTime now() const { return now_; }
  Timestamp calendar_now() const;
  Timestamp epoch() const { return epoch_; }

  /// Calendar instant `at` expressed in virtual seconds.
  SimTime to_sim(Timestamp at) const {
    return static_cast<SimTime>((at - epoch_).count());
  }

  /// Per-component stream seeded from (root seed, component path).
  std::mt19937_64& rng() { return rng_; }

  const std::string& phase() const { return phase_; }
  SimTime sigma() const { return sigma_; }

  struct Counts {
    std::uint64_t lambda = 0, internal = 0, external = 0, confluent = 0;
  };
  const Counts& counts() const { return counts_; }

 protected:
  void hold_in(std::string phase, SimTime sigma) {
    phase_ = std::move(phase);
    sigma_ = sigma;
  }
  void passivate() { hold_in("passive", kInfinity); }
  void activate() { sigma_ = 0.0; }
  void resume(SimTime elapsed) {
    if (sigma_ != kInfinity) sigma_ -= elapsed;
  }

 private:
  friend class Coordinator;

  std::string phase_ = "passive";
  SimTime sigma_ = kInfinity;
  SimTime now_ = 0.0;
  Timestamp epoch_{};
  std::mt19937_64 rng_;
  Counts counts_;
};

class Coupled : public Component {
 public:
  using Component::Component;

  bool is_atomic() const final { return false; }

  template <class T, class... Args>
  T& add(Args&&... args) {
    auto child = std::make_unique<T>(std::forward<Args>(args)...);
    T& ref = *child;
    add(std::move(child));
    return ref;
  }
  Component& add(std::unique_ptr<Component> child);

  template <class T>
  void couple(Port<T>& from, Port<T>& to) {
    couplings_.push_back({&from, &to});
  }

  struct Coupling {
    PortBase* from;
    PortBase* to;
  };

  const std::vector<std::unique_ptr<Component>>& children() const { return children_; }
  const std::vector<Coupling>& couplings() const { return couplings_; }

 private:
  std::vector<std::unique_ptr<Component>> children_;
  std::vector<Coupling> couplings_;
};

/// splitmix64-mixed FNV-1a of the component path, salted with the root seed.
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view component_path);

}  // namespace heliofarm::devs
