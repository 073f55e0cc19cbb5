// Timing table: reference loops vs the library kernels run serial and
// parallel. Informational only, no assertions.
#include <chrono>
#include <cstdio>
#include <functional>

#include "enrest/blocks.hpp"
#include "enrest/nn_ops.hpp"
#include "enrest/parallel.hpp"
#include "enrest/reference.hpp"
#include "enrest/rng.hpp"

using namespace enrest;

namespace {

Tensor rand_tensor(const Shape& s, Rng& rng) {
  Tensor t = Tensor::zeros(s, DType::F32);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(-1.0, 1.0));
  return t;
}

double time_ms(const std::function<void()>& f, int reps) {
  f();  // warm caches and the thread pool
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, const std::function<void()>& reference,
         const std::function<void()>& optimized, int reps) {
  const double tr = time_ms(reference, 1);
  par::set_enabled(false);
  const double ts = time_ms(optimized, reps);
  par::set_enabled(true);
  const double tp = time_ms(optimized, reps);
  std::printf("%-30s %11.2f %11.3f %11.3f %8.1fx %8.1fx\n", name, tr, ts, tp, tr / ts, ts / tp);
}

}  // namespace

int main() {
  Rng rng(7);
  std::printf("threads: %d\n", par::thread_count());
  std::printf("%-30s %11s %11s %11s %9s %9s\n", "case", "ref ms", "serial ms", "par ms",
              "ref/ser", "ser/par");

  {
    const Tensor x = rand_tensor({1, 32, 64, 64}, rng);
    const Tensor w = rand_tensor({32, 32, 3, 3}, rng);
    const Tensor b = rand_tensor({32}, rng);
    const ConvParams p{w, b, 1, 1, 1};
    row("conv3x3 32ch 64x64", [&] { ref::conv2d(x, w, b, 1, 1, 1); }, [&] { conv2d(x, p); }, 10);
  }
  {
    const Tensor x = rand_tensor({1, 64, 64, 64}, rng);
    const Tensor w = rand_tensor({64, 32, 3, 3}, rng);
    const ConvParams p{w, Tensor(), 1, 1, 2};
    row("conv3x3 g2 64ch 64x64", [&] { ref::conv2d(x, w, Tensor(), 1, 1, 2); },
        [&] { conv2d(x, p); }, 10);
  }
  {
    const Tensor x = rand_tensor({1, 64, 64, 64}, rng);
    const Tensor w = rand_tensor({64, 64, 1, 1}, rng);
    const ConvParams p{w, Tensor(), 1, 0, 1};
    row("conv1x1 64ch 64x64", [&] { ref::conv2d(x, w, Tensor(), 1, 0, 1); },
        [&] { conv2d(x, p); }, 20);
  }
  {
    const Tensor x = rand_tensor({1, 32, 64, 64}, rng);
    row("bilinear up2x 32ch 64x64", [&] { ref::bilinear_up2x(x); }, [&] { bilinear_up2x(x); },
        20);
  }
  {
    ModelConfig cfg;
    cfg.n_rrg = 1;
    cfg.n_mrb = 1;
    cfg.channels = {8, 12, 16};
    Model m = build_model(cfg);
    Rng ir(11);
    init_params(m, ir);
    const Tensor x = rand_tensor({1, 3, 64, 64}, rng);
    row("tiny model fwd 3x64x64", [&] { ref::model_forward(m, x); },
        [&] { model_forward(m, x); }, 5);
  }
  par::set_enabled(true);
  return 0;
}
