// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/bpe.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"

namespace lsac {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (is_space(c)) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(lower(c));
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::vector<std::string> word_symbols(const std::string& word) {
    std::vector<std::string> symbols;
    for (std::size_t i = 0; i < word.size(); ++i) {
        std::string s(1, word[i]);
        if (i + 1 == word.size()) s += kEndOfWord;
        symbols.push_back(std::move(s));
    }
    return symbols;
}

// Merges every occurrence of (left, right), scanning left to right.
void merge_pair(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
    std::vector<std::string> out;
    out.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
            out.push_back(left + right);
            ++i;
        } else {
            out.push_back(std::move(symbols[i]));
        }
    }
    symbols = std::move(out);
}

std::vector<std::string> base_alphabet() {
    std::vector<std::string> tokens;
    for (int c = 0x21; c <= 0x7e; ++c) tokens.emplace_back(1, static_cast<char>(c));
    for (int c = 0x21; c <= 0x7e; ++c) tokens.push_back(std::string(1, static_cast<char>(c)) + std::string(kEndOfWord));
    return tokens;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string pattern) : pattern_(std::move(pattern)) {
    const auto first = pattern_.find("{}");
    if (first == std::string::npos || pattern_.find("{}", first + 2) != std::string::npos) {
        throw ConfigError("prompt template must contain exactly one {} placeholder: \"" + pattern_ + "\"");
    }
    slot_ = first;
}

std::string apply_prompt(std::string_view label, const PromptTemplate& prompt) {
    if (label.empty()) throw ConfigError("apply_prompt: empty label");
    std::string text = prompt.pattern_.substr(0, prompt.slot_);
    for (char c : label) text.push_back(c == '_' ? ' ' : c);
    text += prompt.pattern_.substr(prompt.slot_ + 2);
    for (char& c : text) c = lower(c);
    return text;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    for (const auto& w : split_words(text)) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

BpeVocab::BpeVocab(std::vector<std::string> tokens, std::vector<Merge> merges)
    : tokens_(std::move(tokens)), merges_(std::move(merges)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const auto& t = tokens_[i];
        if (t.empty()) throw FormatError("vocab: empty token at id " + std::to_string(i));
        if (std::any_of(t.begin(), t.end(), is_space)) {
            throw FormatError("vocab: token at id " + std::to_string(i) + " contains whitespace");
        }
        if (!ids_.emplace(t, i).second) throw FormatError("vocab: duplicate token \"" + t + "\"");
    }
    const auto start = find(kStartToken), end = find(kEndToken);
    if (!start || !end) throw FormatError("vocab: missing start or end token");
    start_id_ = *start;
    end_id_ = *end;
    for (std::size_t r = 0; r < merges_.size(); ++r) {
        const auto& [a, b] = merges_[r];
        if (!find(a) || !find(b) || !find(a + b)) {
            throw FormatError("vocab: merge " + std::to_string(r) + " (\"" + a + "\", \"" + b +
                              "\") references a missing token");
        }
        if (!ranks_.emplace(merges_[r], r).second) {
            throw FormatError("vocab: duplicate merge (\"" + a + "\", \"" + b + "\")");
        }
    }
}

BpeVocab BpeVocab::parse(std::string_view text) {
    enum { none, vocab, merges } section = none;
    std::vector<std::string> tokens;
    std::vector<Merge> pairs;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "#VOCAB") {
            section = vocab;
        } else if (line == "#MERGES") {
            section = merges;
        } else if (line.empty()) {
            continue;
        } else if (section == vocab) {
            tokens.push_back(line);
        } else if (section == merges) {
            const auto sp = line.find(' ');
            if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() || line.find(' ', sp + 1) != std::string::npos) {
                throw FormatError("vocab line " + std::to_string(line_no) + ": merge must be \"left right\"");
            }
            pairs.emplace_back(line.substr(0, sp), line.substr(sp + 1));
        } else {
            throw FormatError("vocab line " + std::to_string(line_no) + ": content before #VOCAB");
        }
    }
    return BpeVocab(std::move(tokens), std::move(pairs));
}

BpeVocab BpeVocab::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

std::string BpeVocab::serialize() const {
    std::string out = "#VOCAB\n";
    for (const auto& t : tokens_) out += t + "\n";
    out += "#MERGES\n";
    for (const auto& [a, b] : merges_) out += a + " " + b + "\n";
    return out;
}

std::optional<std::size_t> BpeVocab::find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> BpeVocab::merge_rank(const std::string& left, const std::string& right) const {
    auto it = ranks_.find(Merge{left, right});
    if (it == ranks_.end()) return std::nullopt;
    return it->second;
}

TokenSequence tokenize(std::string_view text, const BpeVocab& vocab, std::size_t max_len) {
    if (max_len < 2) throw ConfigError("tokenize: max_len must leave room for start and end tokens");
    TokenSequence seq;
    seq.ids.push_back(vocab.start_id());
    for (const auto& word : split_words(text)) {
        std::vector<std::string> symbols = word_symbols(word);
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            if (!vocab.find(symbols[i])) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "0x%02X", static_cast<unsigned char>(word[i]));
                throw FormatError("tokenize: no token for byte " + std::string(buf) + " in \"" + word + "\"");
            }
        }
        while (symbols.size() > 1) {
            std::optional<std::size_t> best;
            std::size_t at = 0;
            for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
                auto r = vocab.merge_rank(symbols[i], symbols[i + 1]);
                if (r && (!best || *r < *best)) {
                    best = r;
                    at = i;
                }
            }
            if (!best) break;
            const std::string left = symbols[at], right = symbols[at + 1];
            merge_pair(symbols, left, right);
        }
        for (const auto& s : symbols) seq.ids.push_back(*vocab.find(s));
    }
    if (seq.ids.size() + 1 > max_len) seq.ids.resize(max_len - 1);
    seq.ids.push_back(vocab.end_id());
    return seq;
}

std::string decode(const TokenSequence& tokens, const BpeVocab& vocab) {
    std::string joined;
    for (std::size_t id : tokens.ids) {
        if (id == vocab.start_id() || id == vocab.end_id()) continue;
        joined += vocab.token(id);
    }
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = joined.find(kEndOfWord, pos);
        out.append(joined, pos, hit == std::string::npos ? std::string::npos : hit - pos);
        if (hit == std::string::npos) break;
        out.push_back(' ');
        pos = hit + kEndOfWord.size();
    }
    return normalize_text(out);
}

BpeVocab learn_bpe(const std::vector<std::string>& corpus, std::size_t vocab_size) {
    std::vector<std::string> tokens = base_alphabet();
    if (vocab_size < tokens.size() + 2) {
        throw ConfigError("learn_bpe: vocab_size must be at least " + std::to_string(tokens.size() + 2));
    }
    std::map<std::string, std::size_t> freq;
    for (const auto& line : corpus) {
        for (auto& w : split_words(line)) {
            for (char c : w) {
                if (c < 0x21 || c > 0x7e) throw FormatError("learn_bpe: non-printable-ASCII byte in corpus word \"" + w + "\"");
            }
            ++freq[w];
        }
    }
    std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
    for (const auto& [w, n] : freq) words.emplace_back(word_symbols(w), n);

    std::unordered_map<std::string, std::size_t> known;
    for (std::size_t i = 0; i < tokens.size(); ++i) known.emplace(tokens[i], i);
    std::vector<BpeVocab::Merge> merges;
    while (tokens.size() + 2 < vocab_size) {
        std::map<BpeVocab::Merge, std::size_t> counts;
        for (const auto& [symbols, n] : words) {
            for (std::size_t i = 0; i + 1 < symbols.size(); ++i) counts[{symbols[i], symbols[i + 1]}] += n;
        }
        if (counts.empty()) break;
        // std::map iterates in lexicographic order, so the first maximum wins ties.
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        const auto [left, right] = best->first;
        merges.emplace_back(left, right);
        if (known.emplace(left + right, tokens.size()).second) tokens.push_back(left + right);
        for (auto& [symbols, n] : words) merge_pair(symbols, left, right);
    }
    tokens.emplace_back(kStartToken);
    tokens.emplace_back(kEndToken);
    return BpeVocab(std::move(tokens), std::move(merges));
}

std::filesystem::path asset_path(std::string_view name) {
    return std::filesystem::path(LSAC_ASSET_DIR) / std::string(name);
}

const BpeVocab& default_vocab() {
    static const BpeVocab vocab = BpeVocab::load(asset_path("bpe_toy.vocab"));
    return vocab;
}

}  // namespace lsac
