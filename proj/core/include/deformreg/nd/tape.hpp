#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "deformreg/nd/tensor.hpp"

namespace deformreg::nd {

// Ordered record of the differentiable operations executed during one forward
// pass. Ops append themselves as they run, so the record is topologically
// sorted by construction; backward() replays it once in reverse and then
// clears it.
//
// A tape built with recording disabled turns every op into a plain forward
// computation (inference mode).
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }

  // True when an op over these inputs must be recorded.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  // The closure reads its output's gradient and accumulates into its inputs'
  // gradient buffers. It is only invoked if the output received a gradient.
  void record(std::string name, Tensor output, std::function<void()> backward);

  // Seeds d(output)/d(output) = 1 and propagates to every requires_grad
  // ancestor. Gradients of leaves accumulate across calls until zeroed.
  void backward(Tensor output);

  void clear() { entries_.clear(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& op_name(std::size_t i) const { return entries_.at(i).name; }

 private:
  struct Entry {
    std::string name;
    Tensor output;
    std::function<void()> backward;
  };
  bool recording_;
  std::vector<Entry> entries_;
};

}  // namespace deformreg::nd
