#pragma once

#include <string>
#include <variant>

#include "cuegen/attributes/bow.hpp"
#include "cuegen/attributes/head.hpp"

namespace cuegen::attributes {

// What a steered generation aims for: a head class/label, or a keyword bag.
struct Attribute {
  std::variant<LinearHead, BowAttribute> model;
  std::size_t target = 0;  // class index for heads; unused for bags
  std::string name;

  bool is_head() const { return std::holds_alternative<LinearHead>(model); }
  const LinearHead& head() const { return std::get<LinearHead>(model); }
  const BowAttribute& bow() const { return std::get<BowAttribute>(model); }

  static Attribute from_head(LinearHead h, std::size_t target) {
    if (target >= h.num_classes()) fail(Errc::LabelOutOfRange, "target class out of range");
    auto name = h.classes[target];
    return {std::move(h), target, std::move(name)};
  }
  static Attribute from_bow(BowAttribute b) {
    auto name = b.name.empty() ? std::string("bow") : b.name;
    return {std::move(b), 0, std::move(name)};
  }
};

}  // namespace cuegen::attributes
