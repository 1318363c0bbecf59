#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace sojourn {

// Fixed-capacity vector/matrix for dimensions up to 3, templated on the
// scalar so the same geometry code runs on doubles and dual numbers.
template <class T>
struct Vec {
  std::array<T, 3> v{};
  int n = 0;

  Vec() = default;
  explicit Vec(int dim) : n(dim) {}
  Vec(std::initializer_list<T> xs) : n(int(xs.size())) {
    int i = 0;
    for (const T& x : xs) v[i++] = x;
  }
  static Vec zero(int dim) { return Vec(dim); }

  T& operator[](int i) { return v[i]; }
  const T& operator[](int i) const { return v[i]; }
  int size() const { return n; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n; ++i) v[i] += o.v[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n; ++i) v[i] -= o.v[i];
    return *this;
  }
  Vec& operator*=(const T& a) {
    for (int i = 0; i < n; ++i) v[i] *= a;
    return *this;
  }
};

template <class T>
Vec<T> operator+(Vec<T> a, const Vec<T>& b) { return a += b; }
template <class T>
Vec<T> operator-(Vec<T> a, const Vec<T>& b) { return a -= b; }
template <class T>
Vec<T> operator*(const T& s, Vec<T> a) { return a *= s; }
template <class T>
Vec<T> operator*(Vec<T> a, const T& s) { return a *= s; }

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  T s{};
  for (int i = 0; i < a.n; ++i) s += a.v[i] * b.v[i];
  return s;
}

template <class T>
struct Mat {
  std::array<T, 9> m{};
  int n = 0;

  Mat() = default;
  explicit Mat(int dim) : n(dim) {}
  static Mat zero(int dim) { return Mat(dim); }
  static Mat identity(int dim) {
    Mat r(dim);
    for (int i = 0; i < dim; ++i) r(i, i) = T(1);
    return r;
  }

  T& operator()(int i, int j) { return m[i * 3 + j]; }
  const T& operator()(int i, int j) const { return m[i * 3 + j]; }
  int size() const { return n; }

  Mat& operator+=(const Mat& o) {
    for (int i = 0; i < 9; ++i) m[i] += o.m[i];
    return *this;
  }
  Mat& operator*=(const T& a) {
    for (int i = 0; i < 9; ++i) m[i] *= a;
    return *this;
  }
};

template <class T>
Mat<T> operator+(Mat<T> a, const Mat<T>& b) { return a += b; }
template <class T>
Mat<T> operator*(const T& s, Mat<T> a) { return a *= s; }

template <class T>
Vec<T> mul(const Mat<T>& A, const Vec<T>& x) {
  Vec<T> r(A.n);
  for (int i = 0; i < A.n; ++i) {
    T s{};
    for (int j = 0; j < A.n; ++j) s += A(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

template <class T>
Mat<T> mul(const Mat<T>& A, const Mat<T>& B) {
  Mat<T> r(A.n);
  for (int i = 0; i < A.n; ++i)
    for (int j = 0; j < A.n; ++j) {
      T s{};
      for (int k = 0; k < A.n; ++k) s += A(i, k) * B(k, j);
      r(i, j) = s;
    }
  return r;
}

template <class T>
Mat<T> transpose(const Mat<T>& A) {
  Mat<T> r(A.n);
  for (int i = 0; i < A.n; ++i)
    for (int j = 0; j < A.n; ++j) r(i, j) = A(j, i);
  return r;
}

template <class T>
T det(const Mat<T>& A) {
  switch (A.n) {
    case 1: return A(0, 0);
    case 2: return A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    case 3:
      return A(0, 0) * (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1)) -
             A(0, 1) * (A(1, 0) * A(2, 2) - A(1, 2) * A(2, 0)) +
             A(0, 2) * (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0));
    default: throw std::logic_error("det: unsupported dimension");
  }
}

template <class T>
Mat<T> inverse(const Mat<T>& A) {
  Mat<T> r(A.n);
  T d = det(A);
  if (A.n == 1) {
    r(0, 0) = T(1) / d;
  } else if (A.n == 2) {
    r(0, 0) = A(1, 1) / d;
    r(0, 1) = -A(0, 1) / d;
    r(1, 0) = -A(1, 0) / d;
    r(1, 1) = A(0, 0) / d;
  } else if (A.n == 3) {
    r(0, 0) = (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1)) / d;
    r(0, 1) = (A(0, 2) * A(2, 1) - A(0, 1) * A(2, 2)) / d;
    r(0, 2) = (A(0, 1) * A(1, 2) - A(0, 2) * A(1, 1)) / d;
    r(1, 0) = (A(1, 2) * A(2, 0) - A(1, 0) * A(2, 2)) / d;
    r(1, 1) = (A(0, 0) * A(2, 2) - A(0, 2) * A(2, 0)) / d;
    r(1, 2) = (A(0, 2) * A(1, 0) - A(0, 0) * A(1, 2)) / d;
    r(2, 0) = (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0)) / d;
    r(2, 1) = (A(0, 1) * A(2, 0) - A(0, 0) * A(2, 1)) / d;
    r(2, 2) = (A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0)) / d;
  } else {
    throw std::logic_error("inverse: unsupported dimension");
  }
  return r;
}

using Vecd = Vec<double>;
using Matd = Mat<double>;

inline double norm2(const Vecd& a) { return std::sqrt(dot(a, a)); }

inline bool positive_definite(const Matd& A) {
  // Sylvester criterion, dimensions <= 3.
  if (A.n >= 1 && !(A(0, 0) > 0)) return false;
  if (A.n >= 2 && !(A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0) > 0)) return false;
  if (A.n >= 3 && !(det(A) > 0)) return false;
  return true;
}

}  // namespace sojourn
