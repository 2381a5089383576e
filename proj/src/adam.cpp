#include "dicycle/adam.hpp"

#include <cmath>

namespace dicycle {

AdamState AdamState::init(const std::vector<TensorPtr>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& p : params) {
    st.m.emplace_back(Eigen::ArrayXd::Zero(p->numel()));
    st.v.emplace_back(Eigen::ArrayXd::Zero(p->numel()));
  }
  return st;
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: state holds " + std::to_string(state.m.size()) +
                        " moment pairs for " + std::to_string(params.size()) + " parameters");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (p.grad.size() != p.data.size()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) +
                          " has gradient of size " + std::to_string(p.grad.size()) +
                          " for data of size " + std::to_string(p.data.size()));
    }
    if (state.m[i].size() != p.data.size()) {
      throw ContractError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * p.grad;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * p.grad.square();
    p.data -= cfg.lr * (state.m[i] / bc1) / ((state.v[i] / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace dicycle
