#include "hjbadp/activations.hpp"

#include <cmath>

#include "hjbadp/errors.hpp"

namespace hjbadp {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kElu: return "elu";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
    case Activation::kScaledTanh: return "scaled_tanh";
  }
  throw ConfigError("unknown activation enum value");
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "elu") return Activation::kElu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "scaled_tanh") return Activation::kScaledTanh;
  throw ConfigError("unknown activation name: " + name);
}

namespace {

inline double sigmoid(double z) { return 0.5 * (1.0 + std::tanh(0.5 * z)); }

}  // namespace

double act_value(Activation a, double scale, double z) {
  switch (a) {
    case Activation::kLinear: return z;
    case Activation::kElu: return z > 0.0 ? z : std::expm1(z);
    case Activation::kTanh: return std::tanh(z);
    case Activation::kSoftplus: return std::fmax(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
    case Activation::kScaledTanh: return scale * std::tanh(z);
  }
  throw ConfigError("unknown activation enum value");
}

double act_d1(Activation a, double scale, double z) {
  switch (a) {
    case Activation::kLinear: return 1.0;
    case Activation::kElu: return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kSoftplus: return sigmoid(z);
    case Activation::kScaledTanh: {
      const double t = std::tanh(z);
      return scale * (1.0 - t * t);
    }
  }
  throw ConfigError("unknown activation enum value");
}

double act_d2(Activation a, double scale, double z) {
  switch (a) {
    case Activation::kLinear: return 0.0;
    case Activation::kElu: return z > 0.0 ? 0.0 : std::exp(z);
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::kSoftplus: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::kScaledTanh: {
      const double t = std::tanh(z);
      return scale * (-2.0 * t * (1.0 - t * t));
    }
  }
  throw ConfigError("unknown activation enum value");
}

void act_value(Activation a, double scale, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  const auto za = z.array();
  switch (a) {
    case Activation::kLinear:
      out = z;
      return;
    case Activation::kElu:
      out = (za > 0.0).select(za, za.min(0.0).exp() - 1.0).matrix();
      return;
    case Activation::kTanh:
      out = za.tanh().matrix();
      return;
    case Activation::kSoftplus:
      out = (za.max(0.0) + (-za.abs()).exp().log1p()).matrix();
      return;
    case Activation::kScaledTanh:
      out = (scale * za.tanh()).matrix();
      return;
  }
  throw ConfigError("unknown activation enum value");
}

void act_d1(Activation a, double scale, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  const auto za = z.array();
  switch (a) {
    case Activation::kLinear:
      out = Eigen::MatrixXd::Ones(z.rows(), z.cols());
      return;
    case Activation::kElu:
      out = (za > 0.0)
                .select(Eigen::ArrayXXd::Ones(z.rows(), z.cols()), za.min(0.0).exp())
                .matrix();
      return;
    case Activation::kTanh:
      out = (1.0 - za.tanh().square()).matrix();
      return;
    case Activation::kSoftplus:
      out = (0.5 * (1.0 + (0.5 * za).tanh())).matrix();
      return;
    case Activation::kScaledTanh:
      out = (scale * (1.0 - za.tanh().square())).matrix();
      return;
  }
  throw ConfigError("unknown activation enum value");
}

void act_d2(Activation a, double scale, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  const auto za = z.array();
  switch (a) {
    case Activation::kLinear:
      out = Eigen::MatrixXd::Zero(z.rows(), z.cols());
      return;
    case Activation::kElu:
      out = (za > 0.0)
                .select(Eigen::ArrayXXd::Zero(z.rows(), z.cols()), za.min(0.0).exp())
                .matrix();
      return;
    case Activation::kTanh: {
      const Eigen::ArrayXXd t = za.tanh();
      out = (-2.0 * t * (1.0 - t.square())).matrix();
      return;
    }
    case Activation::kSoftplus: {
      const Eigen::ArrayXXd s = 0.5 * (1.0 + (0.5 * za).tanh());
      out = (s * (1.0 - s)).matrix();
      return;
    }
    case Activation::kScaledTanh: {
      const Eigen::ArrayXXd t = za.tanh();
      out = (scale * (-2.0 * t * (1.0 - t.square()))).matrix();
      return;
    }
  }
  throw ConfigError("unknown activation enum value");
}

}  // namespace hjbadp
