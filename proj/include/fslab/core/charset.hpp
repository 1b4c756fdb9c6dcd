#pragma once

#include "fslab/core/errors.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fslab {

/// Raised by Charset::encode for characters outside the vocabulary.
struct UnknownSymbol : DataError {
    UnknownSymbol(char symbol, std::size_t position);
    char symbol;
    std::size_t position;
};

/// Output vocabulary of the recognizer.
///
/// Layout: the 26 lowercase letters, then the punctuation symbols, then
/// <start> and <end>. These are the decodable symbols (33 with the default
/// punctuation). Two reserved ids follow: pad (masked everywhere) and the
/// frame-annotation blank, serialized as "_".
class Charset {
public:
    /// Space, apostrophe, hyphen, period, ampersand.
    static constexpr std::string_view kDefaultPunctuation = " '-.&";
    static constexpr std::string_view kBlankSymbol = "_";

    Charset() : Charset(kDefaultPunctuation) {}
    explicit Charset(std::string_view punctuation);

    int size() const { return static_cast<int>(symbols_.size()); }  // decodable symbols
    int letter_count() const { return size() - 2; }
    int start_id() const { return letter_count(); }
    int end_id() const { return letter_count() + 1; }
    int pad_id() const { return size(); }
    int blank_id() const { return size() + 1; }
    /// Number of embedding rows needed to cover every id including pad and blank.
    int id_space() const { return size() + 2; }

    bool is_letter(int id) const { return id >= 0 && id < letter_count(); }
    std::optional<int> id_of(char c) const;
    int space_id() const;
    const std::string& symbol(int id) const;
    std::string_view punctuation() const { return punctuation_; }

    /// <start> + letters + <end>.
    std::vector<int> encode(std::string_view word) const;
    std::vector<int> encode_letters(std::string_view word) const;
    /// Inverse of encode(); a leading <start> and trailing <end> are optional.
    std::string decode(std::span<const int> ids) const;

    /// Frame label ids (letters or blank) <-> symbol strings ("_" for blank).
    std::string label_symbol(int id) const;
    int label_id(std::string_view symbol) const;

    /// SHA-256 over the ordered symbol table; stored in checkpoints.
    std::string hash() const;

private:
    std::string punctuation_;
    std::vector<std::string> symbols_;
    int index_of_[256];
};

}  // namespace fslab
