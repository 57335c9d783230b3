#pragma once

#include <span>
#include <string>
#include <vector>

#include "bridgeprompt/dataset.hpp"
#include "bridgeprompt/sampling.hpp"

namespace bp {

enum class PromptMode {
  Text,   // gesture descriptions from the vocabulary
  Index,  // categorical "Gesture <k>" descriptors
};

PromptMode parse_prompt_mode(std::string_view s);
const char* to_string(PromptMode mode);

// The four text prompts of one clip.
struct PromptSet {
  std::string statistical;
  std::vector<std::string> ordinals;
  std::vector<std::string> semantics;
  std::string integrated;

  std::size_t run_count() const { return ordinals.size(); }
  bool operator==(const PromptSet&) const = default;
};

// "first" .. "sixteenth"; ParameterError outside 1..16.
std::string ordinal_word(std::size_t i);
// "Firstly" .. "Sixteenthly".
std::string ordinal_adverb(std::size_t i);

PromptSet build_prompts(std::span<const LabelRun> runs, const GestureVocabulary& vocab, PromptMode mode);

// Every word the prompt templates can emit for this vocabulary, lowercased
// and sorted; the text encoder's lexicon.
std::vector<std::string> prompt_lexicon(const GestureVocabulary& vocab);

// Lowercases and splits on whitespace, dropping commas and periods.
std::vector<std::string> tokenize(std::string_view prompt);

}  // namespace bp
