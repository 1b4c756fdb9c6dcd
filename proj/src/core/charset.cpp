#include "fslab/core/charset.hpp"

#include "fslab/core/digest.hpp"

#include <algorithm>

namespace fslab {

UnknownSymbol::UnknownSymbol(char symbol_, std::size_t position_)
    : DataError("unknown symbol '" + std::string(1, symbol_) + "' at position " + std::to_string(position_)),
      symbol(symbol_), position(position_)
{
}

Charset::Charset(std::string_view punctuation) : punctuation_(punctuation)
{
    std::fill(std::begin(index_of_), std::end(index_of_), -1);
    for (char c = 'a'; c <= 'z'; ++c) symbols_.emplace_back(1, c);
    for (char c : punctuation) {
        if ((c >= 'a' && c <= 'z') || c == kBlankSymbol[0] ||
            std::find(symbols_.begin(), symbols_.end(), std::string(1, c)) != symbols_.end()) {
            throw ConfigError("charset: punctuation symbol '" + std::string(1, c) + "' is reserved or duplicated");
        }
        symbols_.emplace_back(1, c);
    }
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
        index_of_[static_cast<unsigned char>(symbols_[i][0])] = static_cast<int>(i);
    }
    symbols_.emplace_back("<start>");
    symbols_.emplace_back("<end>");
}

std::optional<int> Charset::id_of(char c) const
{
    const int id = index_of_[static_cast<unsigned char>(c)];
    if (id < 0) return std::nullopt;
    return id;
}

int Charset::space_id() const { return index_of_[static_cast<unsigned char>(' ')]; }

const std::string& Charset::symbol(int id) const
{
    static const std::string pad = "<pad>";
    static const std::string blank(kBlankSymbol);
    if (id == pad_id()) return pad;
    if (id == blank_id()) return blank;
    if (id < 0 || id >= size()) throw std::out_of_range("charset: id out of range");
    return symbols_[static_cast<std::size_t>(id)];
}

std::vector<int> Charset::encode_letters(std::string_view word) const
{
    std::vector<int> ids;
    ids.reserve(word.size());
    for (std::size_t i = 0; i < word.size(); ++i) {
        auto id = id_of(word[i]);
        if (!id) throw UnknownSymbol(word[i], i);
        ids.push_back(*id);
    }
    return ids;
}

std::vector<int> Charset::encode(std::string_view word) const
{
    std::vector<int> ids;
    ids.reserve(word.size() + 2);
    ids.push_back(start_id());
    for (int id : encode_letters(word)) ids.push_back(id);
    ids.push_back(end_id());
    return ids;
}

std::string Charset::decode(std::span<const int> ids) const
{
    std::size_t begin = 0;
    std::size_t end = ids.size();
    if (begin < end && ids[begin] == start_id()) ++begin;
    if (end > begin && ids[end - 1] == end_id()) --end;
    std::string word;
    word.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        if (!is_letter(ids[i])) {
            throw DataError("charset: non-letter id " + std::to_string(ids[i]) + " inside token sequence");
        }
        word += symbols_[static_cast<std::size_t>(ids[i])];
    }
    return word;
}

std::string Charset::label_symbol(int id) const
{
    if (id == blank_id()) return std::string(kBlankSymbol);
    if (!is_letter(id)) throw DataError("charset: frame label must be a letter or blank");
    return symbols_[static_cast<std::size_t>(id)];
}

int Charset::label_id(std::string_view symbol) const
{
    if (symbol == kBlankSymbol) return blank_id();
    if (symbol.size() == 1) {
        if (auto id = id_of(symbol[0])) return *id;
    }
    throw DataError("charset: invalid frame label '" + std::string(symbol) + "'");
}

std::string Charset::hash() const
{
    std::string joined;
    for (const auto& s : symbols_) {
        joined += s;
        joined += '\x1f';
    }
    return sha256_hex(joined);
}

}  // namespace fslab
