#include "heliofarm/devs/model.hpp"

namespace heliofarm::devs {

PortBase::PortBase(Component& owner, std::string name, Direction direction, std::type_index payload)
    : owner_(&owner), name_(std::move(name)), direction_(direction), payload_(payload) {
  (direction == Direction::input ? owner.inputs_ : owner.outputs_).push_back(this);
}

std::string PortBase::qualified_name() const { return owner_->path() + "." + name_; }

Component::Component(std::string name) : name_(std::move(name)) {}

std::string Component::path() const {
  if (parent_ == nullptr) return name_;
  if (parent_->parent_ == nullptr) return name_;
  return parent_->path() + "." + name_;
}

Timestamp Atomic::calendar_now() const {
  return epoch_ + std::chrono::seconds{static_cast<std::int64_t>(now_)};
}

Component& Coupled::add(std::unique_ptr<Component> child) {
  child->parent_ = this;
  children_.push_back(std::move(child));
  return *children_.back();
}

std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view component_path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : component_path) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = h ^ (root_seed + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace heliofarm::devs
