#pragma once

#include <concepts>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <typeindex>
#include <vector>

#include <fmt/format.h>

namespace heliofarm::devs {

class Component;

enum class Direction { input, output };

/// Text form of a payload for the message log. Domain types opt in by
/// providing a `describe_payload(const T&)` overload findable by ADL.
template <class T>
std::string payload_repr(const T& value) {
  if constexpr (requires { { describe_payload(value) } -> std::convertible_to<std::string>; }) {
    return describe_payload(value);
  } else if constexpr (std::is_arithmetic_v<T>) {
    return fmt::format("{}", value);
  } else if constexpr (std::is_convertible_v<const T&, std::string_view>) {
    return std::string(std::string_view(value));
  } else {
    return "<opaque>";
  }
}

/// Type-erased port. Values on a port form the bag for the current cycle.
class PortBase {
 public:
  PortBase(Component& owner, std::string name, Direction direction, std::type_index payload);
  virtual ~PortBase() = default;

  PortBase(const PortBase&) = delete;
  PortBase& operator=(const PortBase&) = delete;

  const std::string& name() const { return name_; }
  Direction direction() const { return direction_; }
  Component& owner() const { return *owner_; }
  std::type_index payload_type() const { return payload_; }

  /// `<owner path>.<port name>`
  std::string qualified_name() const;

  virtual std::size_t size() const = 0;
  bool empty() const { return size() == 0; }
  virtual void clear() = 0;

  /// Appends value `index` of `source` (same payload type) without copying the payload.
  virtual void append_from(const PortBase& source, std::size_t index) = 0;
  virtual std::string describe(std::size_t index) const = 0;

 private:
  Component* owner_;
  std::string name_;
  Direction direction_;
  std::type_index payload_;
};

template <class T>
class Port : public PortBase {
 public:
  using value_type = T;

  Port(Component& owner, std::string name, Direction direction)
      : PortBase(owner, std::move(name), direction, typeid(T)) {}

  void add(T value) { values_.push_back(std::make_shared<const T>(std::move(value))); }
  void add_shared(std::shared_ptr<const T> value) { values_.push_back(std::move(value)); }

  std::size_t size() const override { return values_.size(); }
  void clear() override { values_.clear(); }

  const T& operator[](std::size_t i) const { return *values_[i]; }
  const std::shared_ptr<const T>& shared(std::size_t i) const { return values_[i]; }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  void append_from(const PortBase& source, std::size_t index) override {
    values_.push_back(static_cast<const Port<T>&>(source).values_[index]);
  }

  std::string describe(std::size_t index) const override { return payload_repr(*values_[index]); }

 private:
  std::vector<std::shared_ptr<const T>> values_;
};

template <class T>
class InPort : public Port<T> {
 public:
  InPort(Component& owner, std::string name) : Port<T>(owner, std::move(name), Direction::input) {}
};

template <class T>
class OutPort : public Port<T> {
 public:
  OutPort(Component& owner, std::string name) : Port<T>(owner, std::move(name), Direction::output) {}
};

}  // namespace heliofarm::devs
