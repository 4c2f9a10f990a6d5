#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ftbert {

enum class Language { kEnglish, kChinese };

/// Sentence segmentation for pre-training corpora.
///
/// English: a sentence ends after a run of '.', '!' or '?' (optionally
/// followed by closing quotes/brackets) when the run is at the end of the
/// text, or is followed by whitespace and then an uppercase ASCII letter.
/// Chinese: a sentence ends after each of 。 ？ ！.
/// Sentences are trimmed, internal newlines become spaces, empty ones are
/// dropped.
std::vector<std::string> segment_sentences(std::string_view document, Language language);

}  // namespace ftbert
