#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/errors.hpp"

namespace notefuse::encoder {

// Word-level tokenizer over normalized note text: splits on whitespace and
// punctuation, keeps a fixed-size vocabulary learned by corpus frequency
// (descending count, lexicographic ties). Out-of-vocabulary words map to
// [unk]. No subword machinery.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kMask = 2;
    static constexpr int kCls = 3;
    static constexpr int kSep = 4;
    static constexpr int kNumSpecials = 5;

    static std::vector<std::string> split_words(const std::string& text) {
        std::vector<std::string> words;
        std::string cur;
        for (char c : text) {
            const bool word_char = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                                   (c >= '0' && c <= '9');
            if (word_char) {
                cur += c;
            } else if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) words.push_back(cur);
        return words;
    }

    static Tokenizer train(const std::vector<std::string>& corpus_lines, int vocab_size) {
        if (vocab_size <= kNumSpecials)
            throw config_error("Tokenizer: vocab_size must exceed the special-token count");
        std::map<std::string, int64_t> counts;
        for (const auto& line : corpus_lines)
            for (const auto& w : split_words(line)) ++counts[w];
        std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Tokenizer tok;
        tok.vocab_size_ = vocab_size;
        for (const auto& [word, n] : items) {
            if (static_cast<int>(tok.word_to_id_.size()) + kNumSpecials >= vocab_size) break;
            const int id = kNumSpecials + static_cast<int>(tok.word_to_id_.size());
            tok.word_to_id_[word] = id;
            tok.id_to_word_.push_back(word);
        }
        return tok;
    }

    int vocab_size() const { return vocab_size_; }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out;
        for (const auto& w : split_words(text)) {
            auto it = word_to_id_.find(w);
            out.push_back(it == word_to_id_.end() ? kUnk : it->second);
        }
        return out;
    }

    std::string id_to_word(int id) const {
        switch (id) {
            case kPad: return "[pad]";
            case kUnk: return "[unk]";
            case kMask: return "[mask]";
            case kCls: return "[cls]";
            case kSep: return "[sep]";
            default: break;
        }
        const size_t at = static_cast<size_t>(id - kNumSpecials);
        if (at >= id_to_word_.size()) throw input_error("Tokenizer: id out of range");
        return id_to_word_[at];
    }

    nlohmann::json to_json() const {
        return {{"vocab_size", vocab_size_}, {"words", id_to_word_}};
    }

    static Tokenizer from_json(const nlohmann::json& j) {
        Tokenizer tok;
        tok.vocab_size_ = j.at("vocab_size").get<int>();
        tok.id_to_word_ = j.at("words").get<std::vector<std::string>>();
        for (size_t i = 0; i < tok.id_to_word_.size(); ++i)
            tok.word_to_id_[tok.id_to_word_[i]] = kNumSpecials + static_cast<int>(i);
        return tok;
    }

private:
    int vocab_size_ = 0;
    std::unordered_map<std::string, int> word_to_id_;
    std::vector<std::string> id_to_word_;
};

}  // namespace notefuse::encoder
