#pragma once

#include <algorithm>
#include <sstream>

#include "medground/mask/png_io.hpp"
#include "medground/synthesis/backend.hpp"
#include "medground/verification/rules.hpp"

namespace medground {

struct OverlayStyle {
  int stroke = 3;
  std::uint8_t r = 255, g = 255, b = 0;
};

/// Copy of `image` with each box outlined; the stroke lies inside the box.
inline RgbImage render_overlay(RgbImage image, const std::vector<NormBox>& boxes,
                               OverlayStyle style = {}) {
  for (const NormBox& nb : boxes) {
    const PixelBox p = denormalize_box(nb, image.width, image.height);
    auto paint = [&](int x, int y) {
      if (x < 0 || y < 0 || x >= image.width || y >= image.height) return;
      std::uint8_t* px = image.pixel(x, y);
      px[0] = style.r;
      px[1] = style.g;
      px[2] = style.b;
    };
    for (int y = p.y_min; y < p.y_max; ++y) {
      for (int x = p.x_min; x < p.x_max; ++x) {
        const bool edge = x - p.x_min < style.stroke || p.x_max - 1 - x < style.stroke ||
                          y - p.y_min < style.stroke || p.y_max - 1 - y < style.stroke;
        if (edge) paint(x, y);
      }
    }
  }
  return image;
}

struct JudgeVerdict {
  bool grounded = false;
  bool unambiguous = false;
  std::string restatement;
  std::string reason;
};

/// Exactly {grounded: bool, unambiguous: bool, restatement: string, reason: string}.
inline Result<JudgeVerdict> parse_judge_reply(std::string_view raw) {
  Json j = Json::parse(raw.begin(), raw.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return make_error("syntax", "judge reply is not a JSON object");
  if (j.size() != 4) return make_error("keys", "judge reply must have exactly four keys");
  JudgeVerdict v;
  try {
    if (!j.at("grounded").is_boolean() || !j.at("unambiguous").is_boolean() ||
        !j.at("restatement").is_string() || !j.at("reason").is_string())
      return make_error("type", "judge reply has wrong field types");
    v.grounded = j["grounded"].get<bool>();
    v.unambiguous = j["unambiguous"].get<bool>();
    v.restatement = j["restatement"].get<std::string>();
    v.reason = j["reason"].get<std::string>();
  } catch (const Json::exception&) {
    return make_error("keys", "judge reply is missing a required key");
  }
  return v;
}

inline std::string judge_system_prompt() {
  return "You verify referring questions written for medical visual grounding.\n"
         "The image shows the answer region(s) outlined in yellow; their coordinates are also "
         "given as [x_min, y_min, x_max, y_max] on a 1000 x 1000 grid and in pixels.\n"
         "First restate what the question asks for. Then decide:\n"
         "- grounded: the outlined region(s) are what the question describes;\n"
         "- unambiguous: no other region in the image fits the description equally well.\n"
         "Respond with a single JSON object and nothing else:\n"
         R"({"grounded": true|false, "unambiguous": true|false, "restatement": "...", "reason": "..."})"
         "\n";
}

inline std::string judge_user_prompt(const ImageRef& image, const std::string& query,
                                     const std::vector<NormBox>& boxes, bool reask) {
  std::ostringstream os;
  os << "Modality: " << to_string(image.modality) << "\n"
     << "Image size: " << image.width << " x " << image.height << " px\n"
     << "Question: " << query << "\n"
     << "Answer boxes:\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const PixelBox p = denormalize_box(boxes[i], image.width, image.height);
    os << "  " << i << ": " << boxes[i] << " (pixels " << p.x_min << ',' << p.y_min << ','
       << p.x_max << ',' << p.y_max << ")\n";
  }
  if (reask)
    os << "Your previous reply was not valid. Reply with exactly the four JSON keys requested.\n";
  return os.str();
}

/// Stage III. `image` may be null, in which case no overlay is attached and
/// the judge relies on the stated coordinates alone.
inline StageOutcome stage3_judge(Backend& backend, const std::string& triplet_id,
                                 const ImageRef& image, const std::string& query,
                                 const std::vector<NormBox>& boxes, const RgbImage* pixels) {
  JudgeRequest req;
  req.triplet_id = triplet_id;
  req.modality = image.modality;
  req.query = query;
  req.boxes = boxes;
  req.system_prompt = judge_system_prompt();
  if (pixels != nullptr) req.overlay_png = encode_rgb_png(render_overlay(*pixels, boxes));

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    req.attempt = attempt;
    req.user_prompt = judge_user_prompt(image, query, boxes, attempt > 0);
    std::string reply;
    try {
      reply = backend.judge(req);
    } catch (const BackendError& e) {
      return StageOutcome::fail(Stage::kJudge, reason::kJudgeUnavailable, e.what());
    }
    auto v = parse_judge_reply(reply);
    if (!v) {
      last_error = v.error().message;
      continue;
    }
    if (!v->grounded) return StageOutcome::fail(Stage::kJudge, reason::kNotGrounded, v->reason);
    if (!v->unambiguous) return StageOutcome::fail(Stage::kJudge, reason::kAmbiguous, v->reason);
    return StageOutcome::pass(Stage::kJudge);
  }
  return StageOutcome::fail(Stage::kJudge, reason::kJudgeMalformed, last_error);
}

}  // namespace medground
