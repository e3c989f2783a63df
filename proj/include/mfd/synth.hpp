#pragma once

#include "mfd/image.hpp"
#include "mfd/random.hpp"

namespace mfd {

/// Procedural sharp RGB scene: shaded background with random rectangles,
/// ellipses, triangles and stripe patches plus mild texture. Used as a
/// stand-in corpus when no photographs are available.
Image synth_scene(int height, int width, Rng& rng);

}  // namespace mfd
