#include <chrono>

#include "deformreg/engine.hpp"
#include "deformreg/error.hpp"
#include "deformreg/pyramid.hpp"
#include "deformreg/warp.hpp"

namespace deformreg::engine {

RegisterResult register_pair(const regnet::RegModel& model, const Image2D& fixed, const Image2D& moving) {
  const auto t0 = std::chrono::steady_clock::now();
  if (fixed.height() != moving.height() || fixed.width() != moving.width()) {
    throw ShapeError("register: fixed and moving images differ in size");
  }
  const auto& arch = model.arch;
  auto pf = pyramid::pad_to_pyramid(fixed, arch.levels);
  auto pm = pyramid::pad_to_pyramid(moving, arch.levels);
  if (pf.image.height() != arch.height || pf.image.width() != arch.width) {
    throw ShapeError("register: images are " + std::to_string(fixed.height()) + "x" + std::to_string(fixed.width()) +
                     " but the model expects " + std::to_string(arch.height) + "x" + std::to_string(arch.width));
  }
  auto flows = regnet::forward(model, pf.image, pm.image);
  RegisterResult r;
  r.field = pyramid::crop(flows.front(), pf.crop);
  r.warped = pyramid::crop(warp::bilinear_warp(pm.image, flows.front()), pf.crop);
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace deformreg::engine
