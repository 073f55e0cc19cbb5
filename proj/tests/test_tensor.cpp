#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "enrest/ops.hpp"
#include "enrest/parallel.hpp"
#include "enrest/serialize.hpp"
#include "enrest/tape.hpp"
#include "support.hpp"

using namespace enrest;
using namespace enrest::test;

TEST_SUITE("tensor") {

TEST_CASE("construction and element access") {
  Tensor z = Tensor::zeros({2, 3}, DType::F32);
  CHECK(z.rank() == 2);
  CHECK(z.numel() == 6);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(1) == 3);
  CHECK(z.dtype() == DType::F32);
  for (std::int64_t i = 0; i < z.numel(); ++i) CHECK(z.at(i) == 0.0);

  Tensor f = Tensor::full({4}, 2.5, DType::F64);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(f.at(i) == 2.5);

  Tensor d = Tensor::from_data({2, 2}, {1, 2, 3, 4}, DType::F64);
  CHECK(d.to_vec() == std::vector<double>{1, 2, 3, 4});

  d.set(1, -7.0);
  CHECK(d.at(1) == -7.0);

  CHECK_THROWS_AS(Tensor::zeros({2, 0}, DType::F32), ShapeError);
  CHECK_THROWS_AS(Tensor::from_data({3}, {1, 2}, DType::F32), ShapeError);
  CHECK_THROWS_AS(z.dim(2), ShapeError);
  CHECK_THROWS_AS(z.at(6), ShapeError);
  CHECK_THROWS_AS(z.set(-1, 0.0), ShapeError);
}

TEST_CASE("scalars have rank zero and one element") {
  Tensor s = Tensor::full({}, 3.0, DType::F64);
  CHECK(s.rank() == 0);
  CHECK(s.numel() == 1);
  CHECK(s.at(0) == 3.0);
}

TEST_CASE("offset walks NCHW row-major") {
  Tensor t = Tensor::zeros({2, 3, 4, 5}, DType::F32);
  CHECK(t.offset(0, 0, 0, 0) == 0);
  CHECK(t.offset(0, 0, 0, 4) == 4);
  CHECK(t.offset(0, 0, 1, 0) == 5);
  CHECK(t.offset(0, 1, 0, 0) == 20);
  CHECK(t.offset(1, 0, 0, 0) == 60);
  CHECK(t.offset(1, 2, 3, 4) == t.numel() - 1);
  Tensor r2 = Tensor::zeros({2, 3}, DType::F32);
  CHECK_THROWS_AS(r2.offset(0, 0, 0, 0), ShapeError);
}

TEST_CASE("copies share storage, clone does not") {
  Tensor a = Tensor::zeros({4}, DType::F32);
  Tensor b = a;
  b.set(2, 5.0);
  CHECK(a.at(2) == 5.0);

  Tensor c = a.clone();
  a.set(0, 9.0);
  CHECK(c.at(0) == 0.0);
}

TEST_CASE("view reshapes shared storage with a fresh grad link") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, DType::F32);
  Tensor v = a.view({3, 2});
  CHECK(v.at(5) == 6.0);
  v.set(0, -1.0);
  CHECK(a.at(0) == -1.0);
  CHECK(v.grad_link() != a.grad_link());
  CHECK_THROWS_AS(a.view({4}), ShapeError);
}

TEST_CASE("astype converts values") {
  Tensor d = Tensor::from_data({2}, {1.0 / 3.0, -2.0}, DType::F64);
  Tensor f = d.astype(DType::F32);
  CHECK(f.dtype() == DType::F32);
  CHECK(f.at(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
  CHECK(f.at(1) == -2.0);
  Tensor back = f.astype(DType::F64);
  CHECK(back.at(0) == static_cast<double>(static_cast<float>(1.0 / 3.0)));
}

TEST_CASE("raw pointers enforce dtype") {
  Tensor f = Tensor::zeros({2}, DType::F32);
  CHECK(f.f32() != nullptr);
  CHECK_THROWS_AS(f.f64(), ShapeError);
  Tensor d = Tensor::zeros({2}, DType::F64);
  CHECK_THROWS_AS(d.f32(), ShapeError);
}

TEST_CASE("rng streams are deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    double x = a.uniform(), y = b.uniform();
    if (x != y) all_equal = false;
    if (x != c.uniform()) any_diff = true;
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);

  for (int i = 0; i < 1000; ++i) {
    std::int64_t k = a.index(7);
    CHECK(k >= 0);
    CHECK(k < 7);
  }
}

TEST_CASE("rng state saves and restores mid-stream") {
  Rng r(9);
  r.normal();  // leave a cached spare in flight
  std::string s = r.save_state();
  std::vector<double> ahead;
  for (int i = 0; i < 10; ++i) ahead.push_back(r.normal());
  r.load_state(s);
  for (int i = 0; i < 10; ++i) CHECK(r.normal() == ahead[static_cast<std::size_t>(i)]);
}

TEST_CASE("rng shuffle is a seed-stable permutation") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7}, v2 = v1, sorted = v1;
  Rng a(5), b(5);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::sort(v1.begin(), v1.end());
  CHECK(v1 == sorted);
}

TEST_CASE("tensor records round trip through streams") {
  Rng rng(1);
  for (DType dt : {DType::F32, DType::F64}) {
    Tensor t = rand_tensor({2, 3, 4, 5}, rng, dt);
    std::stringstream ss;
    io::save_tensor(ss, t);
    Tensor u = io::load_tensor(ss);
    CHECK(u.dtype() == dt);
    CHECK(bitwise_equal(t, u));
  }
  // rank 0 survives too
  std::stringstream ss;
  io::save_tensor(ss, Tensor::full({}, -1.5, DType::F64));
  Tensor s = io::load_tensor(ss);
  CHECK(s.rank() == 0);
  CHECK(s.at(0) == -1.5);
}

TEST_CASE("tensor records reject corruption") {
  Rng rng(2);
  Tensor t = rand_tensor({3, 3}, rng);
  std::stringstream ok;
  io::save_tensor(ok, t);
  const std::string good = ok.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::stringstream b1(bad_magic);
  CHECK_THROWS_AS(io::load_tensor(b1), IOError);

  std::stringstream b2(good.substr(0, good.size() - 4));
  CHECK_THROWS_AS(io::load_tensor(b2), IOError);

  std::string bad_dtype = good;
  bad_dtype[5] = 9;  // dtype tag right after magic and version
  std::stringstream b3(bad_dtype);
  CHECK_THROWS_AS(io::load_tensor(b3), IOError);
}

TEST_CASE("tensor files round trip and report missing paths") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "enrest_tensor_io";
  fs::create_directories(dir);
  Rng rng(3);
  Tensor t = rand_tensor({4, 2}, rng, DType::F64);
  const std::string path = (dir / "t.ertf").string();
  io::save_tensor_file(path, t);
  CHECK(bitwise_equal(io::load_tensor_file(path), t));
  CHECK_THROWS_AS(io::load_tensor_file((dir / "absent.ertf").string()), IOError);
  fs::remove_all(dir);
}

TEST_CASE("tape differentiates a small expression") {
  Tensor x = Tensor::from_data({3}, {1, -2, 0.5}, DType::F64);
  Tape tape;
  tape.watch(x);
  // z = sum(x*x + 3x), dz/dx = 2x + 3
  Tensor z = sum_all(add(mul(x, x), scale(x, 3.0)));
  tape.backward(z);
  Tensor g = tape.grad(x);
  for (std::int64_t i = 0; i < 3; ++i) CHECK(g.at(i) == doctest::Approx(2.0 * x.at(i) + 3.0));
}

TEST_CASE("a leaf used twice accumulates both contributions") {
  Tensor x = Tensor::from_data({2}, {3, 4}, DType::F64);
  Tape tape;
  tape.watch(x);
  Tensor z = sum_all(mul(x, x));  // same tensor on both sides
  tape.backward(z);
  Tensor g = tape.grad(x);
  CHECK(g.at(0) == doctest::Approx(6.0));
  CHECK(g.at(1) == doctest::Approx(8.0));
}

TEST_CASE("unreached leaves read back zero gradients") {
  Tensor x = Tensor::from_data({2}, {1, 2}, DType::F32);
  Tensor u = Tensor::from_data({2}, {5, 5}, DType::F32);
  Tape tape;
  tape.watch(x);
  tape.watch(u);
  Tensor z = sum_all(x);
  tape.backward(z);
  Tensor gu = tape.grad(u);
  CHECK(gu.at(0) == 0.0);
  CHECK(gu.at(1) == 0.0);
}

TEST_CASE("tape misuse throws") {
  Tensor x = Tensor::from_data({2}, {1, 2}, DType::F32);
  Tensor loose = Tensor::from_data({1}, {0}, DType::F32);
  Tape tape;
  tape.watch(x);
  Tensor z = sum_all(x);
  CHECK_THROWS_AS(tape.grad(x), TapeError);            // before backward
  CHECK_THROWS_AS(tape.backward(loose), TapeError);    // loss never tracked
  CHECK_THROWS_AS(tape.backward(x), ShapeError);       // non-scalar loss
  tape.backward(z);
  CHECK_THROWS_AS(tape.backward(z), TapeError);        // single use
  CHECK_THROWS_AS(tape.grad(loose), TapeError);        // untracked tensor
  CHECK_THROWS_AS(tape.watch(x), TapeError);           // spent tape
}

TEST_CASE("ops only record while a tape tracks an input") {
  Tensor a = Tensor::from_data({2}, {1, 2}, DType::F32);
  Tensor b = Tensor::from_data({2}, {3, 4}, DType::F32);
  Tensor free = add(a, b);  // no tape anywhere
  CHECK(free.at(0) == 4.0);

  Tape tape;
  tape.watch(a);
  Tensor tracked = add(a, b);
  Tensor untracked = add(b, b);
  CHECK(tape.node_of(tracked) >= 0);
  CHECK(tape.node_of(untracked) == -1);
  tape.backward(sum_all(tracked));
}

TEST_CASE("inner tape shadows the outer one") {
  Tensor x = Tensor::from_data({2}, {1, 2}, DType::F64);
  Tape outer;
  outer.watch(x);
  {
    Tape inner;
    inner.watch(x);
    Tensor z = sum_all(mul(x, x));
    CHECK(Tape::active() == &inner);
    inner.backward(z);
    CHECK(inner.grad(x).at(0) == doctest::Approx(2.0));
  }
  CHECK(Tape::active() == &outer);
  // the inner watch claimed x's link, so the outer tape must watch it again
  CHECK(outer.node_of(x) == -1);
  outer.watch(x);
  Tensor z2 = sum_all(x);
  outer.backward(z2);
  CHECK(outer.grad(x).at(0) == 1.0);
}

TEST_CASE("parallel switch leaves results bitwise identical") {
  Rng rng(11);
  Tensor a = rand_tensor({64, 48}, rng);
  Tensor b = rand_tensor({48, 32}, rng);
  Tensor big = rand_tensor({4, 7, 200}, rng);

  par::set_enabled(true);
  Tensor m_par = matmul(a, b);
  Tensor s_par = softmax(big, 2);
  par::set_enabled(false);
  Tensor m_seq = matmul(a, b);
  Tensor s_seq = softmax(big, 2);
  par::set_enabled(true);

  CHECK(bitwise_equal(m_par, m_seq));
  CHECK(bitwise_equal(s_par, s_seq));
  CHECK(par::thread_count() >= 1);
}

}  // TEST_SUITE
