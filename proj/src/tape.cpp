#include "enrest/tape.hpp"

#include <algorithm>
#include <atomic>

#include "enrest/parallel.hpp"

namespace enrest {

namespace {

thread_local std::vector<Tape*> t_stack;
thread_local int t_sweeping = 0;
std::atomic<std::uint64_t> g_gen{1};

template <class T>
void add_into(Tensor& dst, const Tensor& src) {
  T* pd = detail::data<T>(dst);
  const T* ps = detail::cdata<T>(src);
  const std::int64_t n = dst.numel();
#pragma omp parallel for if (par::enabled() && n > (1 << 15)) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) pd[i] += ps[i];
}

struct SweepGuard {
  SweepGuard() { ++t_sweeping; }
  ~SweepGuard() { --t_sweeping; }
};

}  // namespace

Tape::Tape() : gen_(g_gen.fetch_add(1, std::memory_order_relaxed)) { t_stack.push_back(this); }

Tape::~Tape() {
  auto it = std::find(t_stack.rbegin(), t_stack.rend(), this);
  if (it != t_stack.rend()) t_stack.erase(std::next(it).base());
}

Tape* Tape::active() { return t_stack.empty() ? nullptr : t_stack.back(); }

bool Tape::sweeping() { return t_sweeping > 0; }

void Tape::watch(const Tensor& t) {
  if (!t.defined()) throw TapeError("watch: undefined tensor");
  if (spent_) throw TapeError("watch: tape already used");
  auto* link = t.grad_link();
  if (link->gen == gen_) return;  // already on this tape
  nodes_.push_back({nullptr, t.shape(), t.dtype()});
  link->gen = gen_;
  link->node = static_cast<std::int32_t>(nodes_.size()) - 1;
}

std::int32_t Tape::node_of(const Tensor& t) const {
  if (!t.defined()) return -1;
  const auto* link = t.grad_link();
  return link->gen == gen_ ? link->node : -1;
}

std::int32_t Tape::record(const Tensor& out, BackFn back) {
  if (spent_) throw TapeError("record: tape already used");
  nodes_.push_back({std::move(back), out.shape(), out.dtype()});
  auto id = static_cast<std::int32_t>(nodes_.size()) - 1;
  auto* link = out.grad_link();
  link->gen = gen_;
  link->node = id;
  return id;
}

void Tape::accumulate(std::int32_t node, const Tensor& contrib) {
  const auto& spec = nodes_.at(static_cast<std::size_t>(node));
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  if (contrib.shape() != spec.shape || contrib.dtype() != spec.dt)
    throw ShapeError("accumulate: gradient shape " + shape_str(contrib.shape()) +
                     " does not match node shape " + shape_str(spec.shape));
  Tensor& g = grads_[static_cast<std::size_t>(node)];
  if (!g.defined()) g = Tensor::zeros(spec.shape, spec.dt);
  detail::dispatch(spec.dt, [&](auto tag) { add_into<decltype(tag)>(g, contrib); });
}

void Tape::backward(const Tensor& loss) {
  if (spent_) throw TapeError("backward: tape already used");
  const std::int32_t ln = node_of(loss);
  if (ln < 0) throw TapeError("backward: loss is not tracked on this tape");
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  grads_.assign(nodes_.size(), Tensor());
  grads_[static_cast<std::size_t>(ln)] = Tensor::full(loss.shape(), 1.0, loss.dtype());
  {
    SweepGuard guard;
    for (std::int32_t i = ln; i >= 0; --i) {
      auto& node = nodes_[static_cast<std::size_t>(i)];
      if (!node.back || !grads_[static_cast<std::size_t>(i)].defined()) continue;
      node.back(*this, grads_[static_cast<std::size_t>(i)]);
    }
  }
  for (auto& node : nodes_) node.back = nullptr;  // release captured forward values
  spent_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
  const std::int32_t n = node_of(t);
  if (n < 0) throw TapeError("grad: tensor is not tracked on this tape");
  if (!spent_) throw TapeError("grad: backward has not run");
  const Tensor& g = grads_[static_cast<std::size_t>(n)];
  if (g.defined()) return g;
  const auto& spec = nodes_[static_cast<std::size_t>(n)];
  return Tensor::zeros(spec.shape, spec.dt);
}

}  // namespace enrest
