#include "wsol/pseudogen.hpp"

#include <cmath>
#include <sstream>

namespace wsol {

MaskOutResult mask_out(const Image& image, const Box& box) {
  if (!box.valid()) throw InputError("mask_out: invalid box");
  MaskOutResult out{image, false};
  if (!(area(box) > 0.0)) {
    out.warning = true;
    return out;
  }
  for (int r = 0; r < image.height; ++r) {
    const double cy = (r + 0.5) / image.height;
    if (cy < box.y_min || cy >= box.y_max) continue;
    for (int c = 0; c < image.width; ++c) {
      const double cx = (c + 0.5) / image.width;
      if (cx >= box.x_min && cx < box.x_max) out.image.data.col(r * image.width + c).setZero();
    }
  }
  return out;
}

std::string format_pseudo_record(const std::string& image_id, const PseudoLabel& label) {
  return image_id + ',' + format_box(label.merged, 6) + ',' + (label.fallback_used ? '1' : '0');
}

PseudoRecord parse_pseudo_record(const std::string& line) {
  std::istringstream is(line);
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (fields.size() != 6) throw LoadError("pseudo-label record must have 6 fields: " + line);
  PseudoRecord rec;
  rec.image_id = fields[0];
  try {
    rec.box = Box(std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]), std::stod(fields[4]));
  } catch (const std::exception&) {
    throw LoadError("pseudo-label record has a malformed coordinate: " + line);
  }
  if (fields[5] != "0" && fields[5] != "1") throw LoadError("pseudo-label fallback flag must be 0 or 1: " + line);
  rec.fallback = fields[5] == "1";
  return rec;
}

}  // namespace wsol
