#pragma once

#include <string>
#include <vector>

#include "medground/core/triplet.hpp"
#include "medground/verification/lexicon.hpp"

namespace medground {

/// Dataset-aware prompt ingredients for one modality.
struct ModalityProfile {
  Modality modality = Modality::kCT;
  std::string terminology_guidance;
  std::vector<std::string> allowed_keywords;
  std::vector<std::string> denied_keywords;
  std::vector<std::string> example_phrasings;
  std::string target_noun;         // used when the manifest gives no category
  std::string target_noun_plural;
};

namespace detail {

struct ProfileText {
  const char* guidance;
  const char* noun;
  const char* plural;
  std::vector<std::string> examples;
};

inline ProfileText profile_text(Modality m) {
  switch (m) {
    case Modality::kCT:
      return {"Chest CT slice. Describe lung findings with radiological terms such as opacity, "
              "consolidation, ground-glass pattern, density and margin definition.",
              "lesion", "lesions",
              {"Where is the patchy ground-glass opacity in the lower right lung?",
               "Locate the small well-defined nodule near the upper left region."}};
    case Modality::kUltrasound:
      return {"Transperineal obstetric ultrasound. Describe structures by echogenicity, contour "
              "and shape (for example the fetal head or the pubic symphysis).",
              "structure", "structures",
              {"Where is the large hyperechoic curved structure on the right side?",
               "Locate the oval hypoechoic region in the upper part of the image."}};
    case Modality::kDermoscopy:
      return {"Dermoscopic image of a skin lesion. Describe pigmentation, symmetry, border "
              "regularity and dermoscopic structures such as dots, globules or streaks.",
              "skin lesion", "skin lesions",
              {"Where is the large asymmetric pigmented lesion with irregular borders?",
               "Locate the brown variegated lesion in the center of the image."}};
    case Modality::kNuclei:
      return {"Microscopy of stained cell nuclei. Describe nuclear shape, staining intensity, "
              "chromatin texture and crowding.",
              "nucleus", "nuclei",
              {"Which nucleus is the elongated hyperchromatic one in the upper left?",
               "Locate the pale round nuclei clustered near the bottom."}};
    case Modality::kBacteria:
      return {"Fluorescence microscopy of bacteria. Describe cell shape, length, brightness and "
              "whether cells are dividing or clustered.",
              "bacterium", "bacteria",
              {"Where is the bright rod-shaped bacterium in the lower right?",
               "Locate the curved dividing cell near the top of the field."}};
  }
  return {"", "region", "regions", {}};
}

}  // namespace detail

/// Builds the profile for `m`, taking its allow and deny lists from `lex`.
inline ModalityProfile make_profile(Modality m, const LexiconSet& lex) {
  auto text = detail::profile_text(m);
  ModalityProfile p;
  p.modality = m;
  p.terminology_guidance = text.guidance;
  p.allowed_keywords = lex.morphology_terms(m).phrases();
  p.denied_keywords = lex.deny_terms(m).phrases();
  p.example_phrasings = text.examples;
  p.target_noun = text.noun;
  p.target_noun_plural = text.plural;
  return p;
}

}  // namespace medground
