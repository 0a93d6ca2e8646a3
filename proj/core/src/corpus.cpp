#include "clmx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "clmx/errors.hpp"
#include "clmx/rng.hpp"
#include "clmx/utf8.hpp"

namespace clmx {

namespace {

const std::string kBosSurface = "<s>";
const std::string kEosSurface = "</s>";
const std::string kUnkSurface = "<unk>";

bool is_special_surface(const std::string& s) {
    return s == kBosSurface || s == kEosSurface || s == kUnkSurface;
}

std::set<std::string> make_set(std::initializer_list<const char*> chars) {
    std::set<std::string> s;
    for (const char* c : chars) s.insert(c);
    return s;
}

}  // namespace

bool CharUnit::is_special() const { return is_special_surface(surface); }

bool CharUnit::has_left_mark() const {
    return !is_special() && !surface.empty() && surface.front() == '+';
}

bool CharUnit::has_right_mark() const {
    return !is_special() && surface.size() > 1 && surface.back() == '+';
}

std::string CharUnit::base() const {
    if (is_special()) return surface;
    std::size_t begin = has_left_mark() ? 1 : 0;
    std::size_t len = surface.size() - begin - (has_right_mark() ? 1 : 0);
    return surface.substr(begin, len);
}

std::string UnitClass::code() const {
    if (position == Position::Special) return "SP";
    char p = 0;
    switch (position) {
        case Position::Begin: p = 'B'; break;
        case Position::Middle: p = 'M'; break;
        case Position::End: p = 'E'; break;
        case Position::Singleton: p = 'S'; break;
        case Position::Special: break;
    }
    char s = sound == Sound::Consonant ? 'C' : sound == Sound::Vowel ? 'V' : 'O';
    return std::string{p, s};
}

UnitClass UnitClass::from_code(std::string_view code) {
    if (code == "SP") return {Position::Special, Sound::Other};
    if (code.size() != 2) throw FormatError("bad unit class code: " + std::string(code));
    UnitClass c;
    switch (code[0]) {
        case 'B': c.position = Position::Begin; break;
        case 'M': c.position = Position::Middle; break;
        case 'E': c.position = Position::End; break;
        case 'S': c.position = Position::Singleton; break;
        default: throw FormatError("bad unit class code: " + std::string(code));
    }
    switch (code[1]) {
        case 'C': c.sound = Sound::Consonant; break;
        case 'V': c.sound = Sound::Vowel; break;
        case 'O': c.sound = Sound::Other; break;
        default: throw FormatError("bad unit class code: " + std::string(code));
    }
    return c;
}

const std::set<std::string>& default_vowels(const std::string& language) {
    static const std::set<std::string> finnish = make_set({"a", "e", "i", "o", "u", "y", "ä", "ö"});
    static const std::set<std::string> swedish = make_set({"a", "e", "i", "o", "u", "y", "ä", "ö", "å"});
    static const std::set<std::string> english = make_set({"a", "e", "i", "o", "u", "y"});
    if (language == "finnish") return finnish;
    if (language == "swedish") return swedish;
    return english;
}

std::vector<CharUnit> mark_word(std::string_view word) {
    if (word.empty()) throw InvalidWord("empty word");
    for (char ch : word) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            throw InvalidWord("word contains whitespace");
        }
    }
    std::vector<std::string> cps = utf8::codepoints(word);
    std::vector<CharUnit> out;
    out.reserve(cps.size());
    std::size_t n = cps.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        if (i > 0) s += '+';
        s += cps[i];
        if (i + 1 < n) s += '+';
        out.push_back(CharUnit{std::move(s)});
    }
    return out;
}

UnitClass classify_unit(const CharUnit& unit, const std::set<std::string>& vowel_set) {
    if (unit.is_special()) return {Position::Special, Sound::Other};
    UnitClass c;
    bool left = unit.has_left_mark();
    bool right = unit.has_right_mark();
    if (left && right) c.position = Position::Middle;
    else if (right) c.position = Position::Begin;
    else if (left) c.position = Position::End;
    else c.position = Position::Singleton;

    std::string folded = utf8::fold_case(unit.base());
    if (vowel_set.count(folded)) c.sound = Sound::Vowel;
    else if (utf8::is_letter(folded)) c.sound = Sound::Consonant;
    else c.sound = Sound::Other;
    return c;
}

Vocabulary::Vocabulary() {
    units_ = {CharUnit{kBosSurface}, CharUnit{kEosSurface}, CharUnit{kUnkSurface}};
    language_tags_.resize(3);
    rebuild_index();
}

void Vocabulary::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < units_.size(); ++i) {
        index_[units_[i].surface] = static_cast<int>(i);
    }
}

int Vocabulary::id_or_unk(const std::string& surface) const {
    auto it = index_.find(surface);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& surface) const {
    return index_.count(surface) != 0;
}

const std::set<std::string>& Vocabulary::languages_of(int id) const {
    return language_tags_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write vocabulary file: " + path.string());
    for (const CharUnit& u : units_) out << u.surface << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read vocabulary file: " + path.string());
    Vocabulary v;
    v.units_.clear();
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        v.units_.push_back(CharUnit{line});
    }
    if (v.units_.size() < 3 || v.units_[0].surface != kBosSurface ||
        v.units_[1].surface != kEosSurface || v.units_[2].surface != kUnkSurface) {
        throw FormatError("vocabulary file must start with <s>, </s>, <unk>");
    }
    v.language_tags_.assign(v.units_.size(), {});
    v.rebuild_index();
    return v;
}

Vocabulary build_vocabulary(const std::vector<std::istream*>& corpora,
                            const std::vector<std::string>& language_names) {
    if (corpora.empty()) throw Error("build_vocabulary: no corpora given");
    if (corpora.size() != language_names.size()) {
        throw Error("build_vocabulary: corpora/language name count mismatch");
    }

    // surface -> contributing languages; std::map gives the canonical
    // byte-lexicographic order directly
    std::map<std::string, std::set<std::string>> seen;
    for (std::size_t c = 0; c < corpora.size(); ++c) {
        std::string line;
        long line_no = 0;
        while (std::getline(*corpora[c], line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::istringstream words(line);
            std::string word;
            while (words >> word) {
                std::vector<CharUnit> units;
                try {
                    units = mark_word(word);
                } catch (const EncodingError& e) {
                    throw EncodingError(language_names[c] + " line " + std::to_string(line_no) +
                                        ": " + e.what());
                }
                for (CharUnit& u : units) seen[u.surface].insert(language_names[c]);
            }
        }
    }

    Vocabulary v;
    for (auto& [surface, langs] : seen) {
        v.units_.push_back(CharUnit{surface});
        v.language_tags_.push_back(langs);
    }
    v.rebuild_index();
    return v;
}

Vocabulary build_vocabulary_from_files(const std::vector<std::filesystem::path>& paths,
                                       const std::vector<std::string>& language_names) {
    std::vector<std::ifstream> files;
    files.reserve(paths.size());
    std::vector<std::istream*> streams;
    for (const auto& p : paths) {
        files.emplace_back(p, std::ios::binary);
        if (!files.back()) throw Error("cannot open corpus file: " + p.string());
        streams.push_back(&files.back());
    }
    return build_vocabulary(streams, language_names);
}

int EncodedCorpus::word_index_of(int sentence, int position) const {
    const auto& spans = word_spans[static_cast<std::size_t>(sentence)];
    for (std::size_t w = 0; w < spans.size(); ++w) {
        if (position >= spans[w].first && position < spans[w].second) return static_cast<int>(w);
    }
    throw Error("position outside any word span");
}

EncodedCorpus encode_corpus(std::istream& text, const Vocabulary& vocab) {
    EncodedCorpus out;
    std::string line;
    long line_no = 0;
    while (std::getline(text, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream words(line);
        std::string word;
        std::vector<int> sentence{Vocabulary::kBos};
        std::vector<std::pair<int, int>> spans;
        while (words >> word) {
            std::vector<CharUnit> units;
            try {
                units = mark_word(word);
            } catch (const EncodingError& e) {
                throw EncodingError("line " + std::to_string(line_no) + ": " + e.what());
            }
            int start = static_cast<int>(sentence.size());
            for (const CharUnit& u : units) sentence.push_back(vocab.id_or_unk(u.surface));
            spans.emplace_back(start, static_cast<int>(sentence.size()));
        }
        if (spans.empty()) continue;  // blank line
        int eos_pos = static_cast<int>(sentence.size());
        sentence.push_back(Vocabulary::kEos);
        spans.emplace_back(eos_pos, eos_pos + 1);
        out.token_count += static_cast<long>(sentence.size());
        out.word_count += static_cast<long>(spans.size());
        out.sentences.push_back(std::move(sentence));
        out.word_spans.push_back(std::move(spans));
    }
    return out;
}

EncodedCorpus encode_corpus_file(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open corpus file: " + path.string());
    return encode_corpus(in, vocab);
}

EncodedCorpus subsample_sentences(const EncodedCorpus& corpus, double fraction,
                                  std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0) throw Error("fraction must be in (0, 1]");
    std::size_t n = corpus.sentences.size();
    std::size_t keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng.uniform_int(i);
        std::swap(perm[i - 1], perm[j]);
    }
    std::vector<bool> selected(n, false);
    for (std::size_t i = 0; i < keep && i < n; ++i) selected[perm[i]] = true;

    EncodedCorpus out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!selected[i]) continue;
        out.sentences.push_back(corpus.sentences[i]);
        out.word_spans.push_back(corpus.word_spans[i]);
        out.token_count += static_cast<long>(corpus.sentences[i].size());
        out.word_count += static_cast<long>(corpus.word_spans[i].size());
    }
    return out;
}

std::vector<Batch> make_batches(const EncodedCorpus& corpus, int batch_size, int seq_len,
                                std::uint64_t seed, bool shuffle) {
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (seq_len < 2) throw Error("seq_len must be >= 2");

    std::size_t n = corpus.sentences.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (shuffle) {
        Rng rng(seed);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }
    }

    // each row is one window of one sentence; no state carryover between
    // windows
    struct Row { int sentence; int start; int len; };
    std::vector<Row> rows;
    for (std::size_t oi = 0; oi < n; ++oi) {
        int s = static_cast<int>(order[oi]);
        int tokens = static_cast<int>(corpus.sentences[static_cast<std::size_t>(s)].size());
        // predictions cover positions start+1 .. start+len
        for (int start = 0; start + 1 < tokens; start += seq_len) {
            int len = std::min(seq_len, tokens - 1 - start);
            rows.push_back({s, start, len});
        }
    }

    std::vector<Batch> batches;
    for (std::size_t r0 = 0; r0 < rows.size(); r0 += static_cast<std::size_t>(batch_size)) {
        int bs = static_cast<int>(std::min<std::size_t>(batch_size, rows.size() - r0));
        Batch b;
        b.batch_size = bs;
        b.seq_len = seq_len;
        b.inputs.assign(static_cast<std::size_t>(bs) * seq_len, 0);
        b.targets.assign(static_cast<std::size_t>(bs) * seq_len, 0);
        b.mask.assign(static_cast<std::size_t>(bs) * seq_len, 0);
        for (int r = 0; r < bs; ++r) {
            const Row& row = rows[r0 + static_cast<std::size_t>(r)];
            const auto& sent = corpus.sentences[static_cast<std::size_t>(row.sentence)];
            b.row_origin.emplace_back(row.sentence, row.start);
            for (int t = 0; t < row.len; ++t) {
                std::size_t k = static_cast<std::size_t>(r) * seq_len + static_cast<std::size_t>(t);
                b.inputs[k] = sent[static_cast<std::size_t>(row.start + t)];
                b.targets[k] = sent[static_cast<std::size_t>(row.start + t + 1)];
                b.mask[k] = 1;
            }
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace clmx
