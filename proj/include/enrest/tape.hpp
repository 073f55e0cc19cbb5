#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "enrest/tensor.hpp"

namespace enrest {

// Reverse-mode tape. Ops append nodes in execution order; backward seeds
// d(loss)/d(loss) = 1 and walks the nodes once in reverse append order,
// accumulating into per-node gradient buffers (so a parameter applied
// twice collects both contributions). A tape lives for one training step
// and is confined to the thread that created it.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // innermost live tape on this thread, nullptr outside any tape scope
  static Tape* active();
  // true while a backward sweep is running; ops skip recording then
  static bool sweeping();

  void watch(const Tensor& t);
  std::int32_t node_of(const Tensor& t) const;  // -1 when untracked here

  using BackFn = std::function<void(Tape&, const Tensor& out_grad)>;
  std::int32_t record(const Tensor& out, BackFn back);

  void accumulate(std::int32_t node, const Tensor& contrib);

  // Single use. Forward intermediates captured by the nodes are released
  // when the sweep finishes; gradients stay readable via grad().
  void backward(const Tensor& loss);

  // defined only after backward; zeros for leaves the sweep never reached
  Tensor grad(const Tensor& t) const;

  bool spent() const { return spent_; }
  std::uint64_t gen() const { return gen_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    BackFn back;  // null for watched leaves
    Shape shape;
    DType dt = DType::F32;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::uint64_t gen_ = 0;
  bool spent_ = false;
};

}  // namespace enrest
