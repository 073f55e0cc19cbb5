// Internal kernel helpers shared by the op implementations. Not installed.
#pragma once

#include <cstdint>

#include "enrest/parallel.hpp"
#include "enrest/tape.hpp"
#include "enrest/tensor.hpp"

namespace enrest::kern {

// Threshold below which parallel dispatch is not worth the fork overhead.
inline constexpr std::int64_t kParGrain = 1 << 12;

inline bool go_par(std::int64_t work) { return par::enabled() && work >= kParGrain; }

// Records a node for `out` if any input is tracked on the live tape.
// `back` receives the tape, the upstream gradient and the input node ids
// in the same order the inputs were passed here.
template <class Back>
void maybe_record(const Tensor& out, std::initializer_list<const Tensor*> inputs, Back&& back) {
  Tape* tp = Tape::active();
  if (!tp || tp->spent() || Tape::sweeping()) return;
  std::vector<std::int32_t> ids;
  ids.reserve(inputs.size());
  bool any = false;
  for (const Tensor* in : inputs) {
    ids.push_back(tp->node_of(*in));
    any = any || ids.back() >= 0;
  }
  if (!any) return;
  tp->record(out, [ids = std::move(ids), back = std::forward<Back>(back)](
                      Tape& t, const Tensor& g) { back(t, g, ids); });
}

}  // namespace enrest::kern
