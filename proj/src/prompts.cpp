#include "bridgeprompt/prompts.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "bridgeprompt/error.hpp"

namespace bp {

namespace {

constexpr std::array<const char*, 16> kOrdinals = {
    "first",      "second",     "third",       "fourth",     "fifth",     "sixth",
    "seventh",    "eighth",     "ninth",       "tenth",      "eleventh",  "twelfth",
    "thirteenth", "fourteenth", "fifteenth",   "sixteenth",
};

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string describe(GestureId g, const GestureVocabulary& vocab, PromptMode mode) {
  if (mode == PromptMode::Index && !g.is_placeholder()) {
    if (!vocab.contains(g)) throw VocabularyError("gesture " + g.token() + " not in vocabulary");
    return "Gesture " + std::to_string(g.index());
  }
  return lowercase(vocab.describe(g));
}

}  // namespace

PromptMode parse_prompt_mode(std::string_view s) {
  if (s == "text") return PromptMode::Text;
  if (s == "index") return PromptMode::Index;
  throw ConfigError("prompt mode must be 'text' or 'index', got '" + std::string(s) + "'");
}

const char* to_string(PromptMode mode) { return mode == PromptMode::Text ? "text" : "index"; }

std::string ordinal_word(std::size_t i) {
  if (i < 1 || i > kOrdinals.size()) throw ParameterError("ordinal out of range: " + std::to_string(i));
  return kOrdinals[i - 1];
}

std::string ordinal_adverb(std::size_t i) {
  auto word = ordinal_word(i);
  word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  return word + "ly";
}

PromptSet build_prompts(std::span<const LabelRun> runs, const GestureVocabulary& vocab, PromptMode mode) {
  if (runs.empty()) throw ContractError("build_prompts: clip has no label runs");
  PromptSet p;
  p.statistical = "this video contains " + std::to_string(runs.size()) + " actions in total";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto n = i + 1;
    p.ordinals.push_back("this is the " + ordinal_word(n) + " action in the video");
    p.semantics.push_back(ordinal_adverb(n) + ", the person is performing " + describe(runs[i].gesture, vocab, mode));
    if (i) p.integrated += " ";
    p.integrated += p.semantics.back();
  }
  return p;
}

std::vector<std::string> tokenize(std::string_view prompt) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : prompt) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (c != ',' && c != '.') {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> prompt_lexicon(const GestureVocabulary& vocab) {
  std::set<std::string> words;
  auto add_all = [&](std::string_view s) {
    for (auto& w : tokenize(s)) words.insert(std::move(w));
  };
  add_all("this video contains actions in total");
  add_all("this is the action in the video");
  add_all("the person is performing gesture");
  for (std::size_t i = 1; i <= kOrdinals.size(); ++i) {
    add_all(ordinal_word(i));
    add_all(ordinal_adverb(i));
    add_all(std::to_string(i));
  }
  add_all(kPreDescription);
  add_all(kPostDescription);
  for (auto g : vocab.gestures()) {
    add_all(vocab.describe(g));
    add_all(std::to_string(g.index()));
  }
  return {words.begin(), words.end()};
}

}  // namespace bp
