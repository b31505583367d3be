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

#ifndef CFDET_GEOMETRY_H_
#define CFDET_GEOMETRY_H_

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace cfdet {

// Index into the global label space declared by the run configuration.
struct ClassId {
  std::uint32_t value = 0;

  constexpr ClassId() = default;
  constexpr explicit ClassId(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(ClassId, ClassId) = default;
};

// Coordinate slop absorbed by ValidateBox before a box is rejected.
inline constexpr double kCoordinateSlop = 1e-6;

// One detection in normalized corner coordinates.
struct Box {
  ClassId cls;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double confidence = 0.0;
  // Index of the model that produced the box.
  int source = 0;

  double Area() const { return (x2 - x1) * (y2 - y1); }
  bool IsDegenerate() const { return !(x2 > x1 && y2 > y1); }

  friend bool operator==(const Box&, const Box&) = default;
};

// All detections of one model (or a pool of models) on a single image, in
// ingestion order.
struct DetectionSet {
  std::string image_id;
  std::vector<Box> boxes;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

// Intersection over union of two axis-aligned rectangles given by corners.
// Returns 0 when the union is empty.
double Iou(double ax1, double ay1, double ax2, double ay2, double bx1,
           double by1, double bx2, double by2);

inline double Iou(const Box& a, const Box& b) {
  return Iou(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2);
}

// Returns `box` with coordinates clamped into [0,1] when they stray by at most
// kCoordinateSlop. Throws InvalidBox on inverted corners, a confidence outside
// [0,1], non-finite values or coordinates beyond the slop.
Box ValidateBox(const Box& box);

}  // namespace cfdet

#endif  // CFDET_GEOMETRY_H_
