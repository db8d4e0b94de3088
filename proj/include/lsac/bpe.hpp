// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Prompting and byte-pair tokenization for class labels.
//
// Words are lowercased byte strings split on ASCII whitespace; the last
// symbol of every word carries the "</w>" end-of-word marker. Merges are
// applied lowest rank first until no ranked pair remains.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lsac/tensor.hpp"

namespace lsac {

inline constexpr std::string_view kStartToken = "<|startoftext|>";
inline constexpr std::string_view kEndToken = "<|endoftext|>";
inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::size_t kDefaultMaxTokens = 76;

// A pattern with exactly one "{}" placeholder.
class PromptTemplate {
public:
    explicit PromptTemplate(std::string pattern);
    const std::string& pattern() const { return pattern_; }

private:
    std::string pattern_;
    std::size_t slot_ = 0;
    friend std::string apply_prompt(std::string_view label, const PromptTemplate& prompt);
};

// Substitutes the label with underscores turned into spaces, then lowercases
// the whole result.
std::string apply_prompt(std::string_view label, const PromptTemplate& prompt);

// Lowercase, whitespace runs collapsed to one space, trimmed.
std::string normalize_text(std::string_view text);

struct TokenSequence {
    std::vector<std::size_t> ids;
    std::size_t length() const { return ids.size(); }
};

class BpeVocab {
public:
    using Merge = std::pair<std::string, std::string>;

    // Validates that ids are dense, tokens unique, the two special tokens
    // present, and that every merge joins two existing tokens into a third.
    BpeVocab(std::vector<std::string> tokens, std::vector<Merge> merges);

    // Text format: a "#VOCAB" line, one token per line in id order, a
    // "#MERGES" line, then one "left right" pair per line in rank order.
    static BpeVocab parse(std::string_view text);
    static BpeVocab load(const std::filesystem::path& path);
    std::string serialize() const;

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    std::optional<std::size_t> find(std::string_view token) const;
    const std::vector<Merge>& merges() const { return merges_; }
    // Rank of merging (left, right), if that pair is a merge.
    std::optional<std::size_t> merge_rank(const std::string& left, const std::string& right) const;

    std::size_t start_id() const { return start_id_; }
    std::size_t end_id() const { return end_id_; }

private:
    std::vector<std::string> tokens_;
    std::vector<Merge> merges_;
    std::unordered_map<std::string, std::size_t> ids_;
    std::map<Merge, std::size_t> ranks_;
    std::size_t start_id_ = 0, end_id_ = 0;
};

// Start token, word pieces, end token. Sequences longer than max_len keep
// their first max_len - 1 tokens and then the end token. Throws FormatError
// for a byte with no base token.
TokenSequence tokenize(std::string_view text, const BpeVocab& vocab, std::size_t max_len = kDefaultMaxTokens);

// Inverse of tokenize up to normalize_text; special tokens are dropped.
std::string decode(const TokenSequence& tokens, const BpeVocab& vocab);

// Base alphabet: printable ASCII (0x21..0x7e), each with and without the
// end-of-word marker, followed by learned merges and then the two specials.
// Pairs are chosen by corpus frequency, ties broken lexicographically.
BpeVocab learn_bpe(const std::vector<std::string>& corpus, std::size_t vocab_size);

// The vocabulary shipped in the asset directory.
const BpeVocab& default_vocab();
std::filesystem::path asset_path(std::string_view name);

}  // namespace lsac
