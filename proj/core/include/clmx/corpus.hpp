#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace clmx {

// A character decorated with boundary marks: `c`, `c+`, `+c+` or `+c`,
// where c is a single base codepoint. The special tokens <s>, </s> and
// <unk> are exempt from the shape rule.
struct CharUnit {
    std::string surface;

    bool is_special() const;
    bool has_left_mark() const;
    bool has_right_mark() const;
    // base codepoint without marks; specials return the surface unchanged
    std::string base() const;

    bool operator==(const CharUnit&) const = default;
};

enum class Position { Begin, Middle, End, Singleton, Special };
enum class Sound { Consonant, Vowel, Other };

struct UnitClass {
    Position position = Position::Special;
    Sound sound = Sound::Other;

    // Two-letter code: BC/BV/BO, MC/MV/MO, EC/EV/EO, SC/SV/SO, SP.
    std::string code() const;
    static UnitClass from_code(std::string_view code);

    bool operator==(const UnitClass&) const = default;
    bool operator<(const UnitClass& o) const {
        return std::pair(position, sound) < std::pair(o.position, o.sound);
    }
};

// Shipped vowel-set defaults; keys "finnish", "swedish", "english".
// Unknown language names fall back to the English set.
const std::set<std::string>& default_vowels(const std::string& language);

std::vector<CharUnit> mark_word(std::string_view word);

UnitClass classify_unit(const CharUnit& unit, const std::set<std::string>& vowel_set);

// Shared multilingual character-unit inventory. Ids are contiguous from 0,
// specials <s>, </s>, <unk> occupy 0, 1, 2, and the remaining units are in
// byte-lexicographic order of their UTF-8 surface.
class Vocabulary {
public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;

    Vocabulary();

    int size() const { return static_cast<int>(units_.size()); }
    const CharUnit& unit(int id) const { return units_[static_cast<std::size_t>(id)]; }
    const std::vector<CharUnit>& units() const { return units_; }

    // id for a surface, or kUnk if absent
    int id_or_unk(const std::string& surface) const;
    bool contains(const std::string& surface) const;

    const std::set<std::string>& languages_of(int id) const;

    // One unit per line, line number = id.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& o) const { return units_ == o.units_; }

private:
    friend Vocabulary build_vocabulary(const std::vector<std::istream*>&,
                                       const std::vector<std::string>&);
    std::vector<CharUnit> units_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::set<std::string>> language_tags_;

    void rebuild_index();
};

Vocabulary build_vocabulary(const std::vector<std::istream*>& corpora,
                            const std::vector<std::string>& language_names);
Vocabulary build_vocabulary_from_files(const std::vector<std::filesystem::path>& paths,
                                       const std::vector<std::string>& language_names);

struct EncodedCorpus {
    // every sentence is <s> ... </s>
    std::vector<std::vector<int>> sentences;
    // per sentence, one (start, end) token range per word over the interior
    // tokens; </s> forms its own single-token span
    std::vector<std::vector<std::pair<int, int>>> word_spans;
    long token_count = 0;
    long word_count = 0;

    // word index of token position t within sentence s (t >= 1)
    int word_index_of(int sentence, int position) const;
};

EncodedCorpus encode_corpus(std::istream& text, const Vocabulary& vocab);
EncodedCorpus encode_corpus_file(const std::filesystem::path& path, const Vocabulary& vocab);

// Keeps the sentences whose permuted rank falls in the first
// ceil(fraction * n); output preserves corpus order, so fraction 1.0 is the
// identity and smaller fractions nest for the same seed.
EncodedCorpus subsample_sentences(const EncodedCorpus& corpus, double fraction,
                                  std::uint64_t seed);

struct Batch {
    int batch_size = 0;
    int seq_len = 0;
    std::vector<int> inputs;        // [batch_size x seq_len]
    std::vector<int> targets;       // [batch_size x seq_len]
    std::vector<std::uint8_t> mask; // 1 on real positions, 0 on padding

    // origin of each row: (sentence index, window start offset)
    std::vector<std::pair<int, int>> row_origin;

    int input(int r, int t) const { return inputs[static_cast<std::size_t>(r) * seq_len + t]; }
    int target(int r, int t) const { return targets[static_cast<std::size_t>(r) * seq_len + t]; }
    bool masked_in(int r, int t) const { return mask[static_cast<std::size_t>(r) * seq_len + t] != 0; }
};

std::vector<Batch> make_batches(const EncodedCorpus& corpus, int batch_size, int seq_len,
                                std::uint64_t seed, bool shuffle);

}  // namespace clmx
