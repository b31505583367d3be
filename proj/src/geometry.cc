/*
 * Copyright 2026 The cfdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cfdet/geometry.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfdet/errors.h"

namespace cfdet {

double Iou(double ax1, double ay1, double ax2, double ay2, double bx1,
           double by1, double bx2, double by2) {
  const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double ih = std::min(ay2, by2) - std::max(ay1, by1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double area_a = std::max(0.0, ax2 - ax1) * std::max(0.0, ay2 - ay1);
  const double area_b = std::max(0.0, bx2 - bx1) * std::max(0.0, by2 - by1);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0 || inter <= 0.0) return 0.0;
  return std::min(1.0, inter / uni);
}

namespace {

double ClampCoordinate(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw InvalidBox(std::string(name) + " is not finite");
  }
  if (v < 0.0) {
    if (v < -kCoordinateSlop) {
      throw InvalidBox(std::string(name) + "=" + std::to_string(v) +
                       " is below 0");
    }
    return 0.0;
  }
  if (v > 1.0) {
    if (v > 1.0 + kCoordinateSlop) {
      throw InvalidBox(std::string(name) + "=" + std::to_string(v) +
                       " is above 1");
    }
    return 1.0;
  }
  return v;
}

}  // namespace

Box ValidateBox(const Box& box) {
  Box out = box;
  out.x1 = ClampCoordinate(box.x1, "x1");
  out.y1 = ClampCoordinate(box.y1, "y1");
  out.x2 = ClampCoordinate(box.x2, "x2");
  out.y2 = ClampCoordinate(box.y2, "y2");
  if (out.x1 > out.x2) throw InvalidBox("x1 > x2");
  if (out.y1 > out.y2) throw InvalidBox("y1 > y2");
  if (!(box.confidence >= 0.0 && box.confidence <= 1.0)) {
    throw InvalidBox("confidence " + std::to_string(box.confidence) +
                     " outside [0,1]");
  }
  return out;
}

}  // namespace cfdet
