#pragma once

#include <Eigen/Core>
#include <string>

namespace hjbadp {

enum class Activation { kLinear, kElu, kTanh, kSoftplus, kScaledTanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Scalar value / first derivative / second derivative.  `scale` only affects
// kScaledTanh; the other activations ignore it.
double act_value(Activation a, double scale, double z);
double act_d1(Activation a, double scale, double z);
double act_d2(Activation a, double scale, double z);

// Elementwise batched variants (column = sample).  Outputs are resized.
void act_value(Activation a, double scale, const Eigen::MatrixXd& z, Eigen::MatrixXd& out);
void act_d1(Activation a, double scale, const Eigen::MatrixXd& z, Eigen::MatrixXd& out);
void act_d2(Activation a, double scale, const Eigen::MatrixXd& z, Eigen::MatrixXd& out);

}  // namespace hjbadp
