#pragma once

#include "decodewin/curves.hpp"

#include <filesystem>
#include <span>
#include <string>

namespace decodewin {

/// Line chart of accuracy versus offset on a fixed 800x480 canvas, one polyline
/// per curve (split at missing points), a legend from curve metadata and a
/// vertical rule at the phone onset. Output depends only on the curves.
std::string render_svg(std::span<const DecodabilityCurve> curves);

void emit_svg(std::span<const DecodabilityCurve> curves, const std::filesystem::path& path);

} // namespace decodewin
