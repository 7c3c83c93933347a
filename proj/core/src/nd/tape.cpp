#include "deformreg/nd/tape.hpp"

#include "deformreg/error.hpp"

namespace deformreg::nd {

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(std::string name, Tensor output, std::function<void()> backward) {
  if (!recording_) return;
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(name), std::move(output), std::move(backward)});
}

void Tape::backward(Tensor output) {
  if (output.numel() != 1) {
    throw ShapeError("backward() needs a single-element output, got shape " + shape_str(output.shape()));
  }
  if (!output.requires_grad()) {
    clear();
    return;
  }
  output.grad_buffer()[0] += 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
  clear();
}

}  // namespace deformreg::nd
