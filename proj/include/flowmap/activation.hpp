#pragma once

#include <cmath>
#include <string>

#include "flowmap/types.hpp"

namespace flowmap {

enum class Activation { gelu, silu, tanh_ };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);
int activation_id(Activation a);
Activation activation_from_id(int id);

// Elementwise value, first and second derivative. The second derivative is
// needed when reverse accumulation runs through a forward-mode tangent:
// the tangent of an activation is f'(x) * xdot, whose pullback to x picks
// up f''(x).
void act_value(Activation a, const Mat& x, Mat& y);
void act_d1(Activation a, const Mat& x, Mat& d1);
void act_d2(Activation a, const Mat& x, Mat& d2);

}  // namespace flowmap
