// Porter stemmer, following the structure of the original reference
// implementation: b[0..k] is the word, j marks the end of the stem once a
// suffix has been recognised.

#include <algorithm>
#include <string>
#include <string_view>

#include "ooc/metrics.hpp"

namespace ooc::metrics {
namespace {

class Stemmer {
public:
    explicit Stemmer(std::string_view w) : b_(w), k_(static_cast<int>(w.size()) - 1) {}

    std::string run() {
        if (k_ <= 1) return b_;
        step1ab();
        if (k_ > 0) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        return b_.substr(0, static_cast<std::size_t>(k_ + 1));
    }

private:
    std::string b_;
    int k_;
    int j_ = 0;

    bool cons(int i) const {
        switch (b_[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !cons(i - 1);
            default: return true;
        }
    }

    // Number of VC sequences in b[0..j].
    int m() const {
        int n = 0, i = 0;
        for (;;) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        for (;;) {
            for (;;) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            for (;;) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j_; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_c(int j) const { return j >= 1 && b_[j] == b_[j - 1] && cons(j); }

    // consonant-vowel-consonant ending at i, last consonant not w, x or y.
    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        const char ch = b_[i];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        const int len = static_cast<int>(s.size());
        if (len > k_ + 1) return false;
        if (std::string_view(b_).substr(static_cast<std::size_t>(k_ + 1 - len), s.size()) != s) return false;
        j_ = k_ - len;
        return true;
    }

    void set_to(std::string_view s) {
        b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
        k_ = j_ + static_cast<int>(s.size());
    }

    void r(std::string_view s) {
        if (m() > 0) set_to(s);
    }

    void step1ab() {
        if (b_[k_] == 's') {
            if (ends("sses")) k_ -= 2;
            else if (ends("ies")) set_to("i");
            else if (b_[k_ - 1] != 's') --k_;
        }
        if (ends("eed")) {
            if (m() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            if (ends("at")) set_to("ate");
            else if (ends("bl")) set_to("ble");
            else if (ends("iz")) set_to("ize");
            else if (double_c(k_)) {
                --k_;
                const char ch = b_[k_];
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
            } else if (m() == 1 && cvc(k_)) {
                set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
    }

    // Tries each (suffix, replacement) in order; the first suffix that
    // matches ends the search whether or not the replacement applies.
    template <std::size_t N>
    void table(const std::pair<std::string_view, std::string_view> (&rules)[N]) {
        for (const auto& [suffix, repl] : rules) {
            if (ends(suffix)) {
                r(repl);
                return;
            }
        }
    }

    void step2() {
        switch (b_[k_ - 1]) {
            case 'a': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"ational", "ate"},
                                                                                   {"tional", "tion"}};
                table(t);
                break;
            }
            case 'c': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"enci", "ence"}, {"anci", "ance"}};
                table(t);
                break;
            }
            case 'e': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"izer", "ize"}};
                table(t);
                break;
            }
            case 'l': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{
                    {"bli", "ble"}, {"alli", "al"}, {"entli", "ent"}, {"eli", "e"}, {"ousli", "ous"}};
                table(t);
                break;
            }
            case 'o': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{
                    {"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}};
                table(t);
                break;
            }
            case 's': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{
                    {"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"}, {"ousness", "ous"}};
                table(t);
                break;
            }
            case 't': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{
                    {"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}};
                table(t);
                break;
            }
            case 'g': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"logi", "log"}};
                table(t);
                break;
            }
            default: break;
        }
    }

    void step3() {
        switch (b_[k_]) {
            case 'e': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{
                    {"icate", "ic"}, {"ative", ""}, {"alize", "al"}};
                table(t);
                break;
            }
            case 'i': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"iciti", "ic"}};
                table(t);
                break;
            }
            case 'l': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"ical", "ic"}, {"ful", ""}};
                table(t);
                break;
            }
            case 's': {
                static constexpr std::pair<std::string_view, std::string_view> t[]{{"ness", ""}};
                table(t);
                break;
            }
            default: break;
        }
    }

    bool any_end(std::initializer_list<std::string_view> suffixes) {
        for (auto s : suffixes)
            if (ends(s)) return true;
        return false;
    }

    void step4() {
        bool hit = false;
        switch (b_[k_ - 1]) {
            case 'a': hit = any_end({"al"}); break;
            case 'c': hit = any_end({"ance", "ence"}); break;
            case 'e': hit = any_end({"er"}); break;
            case 'i': hit = any_end({"ic"}); break;
            case 'l': hit = any_end({"able", "ible"}); break;
            case 'n': hit = any_end({"ant", "ement", "ment", "ent"}); break;
            case 'o':
                hit = (ends("ion") && j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't')) || ends("ou");
                break;
            case 's': hit = any_end({"ism"}); break;
            case 't': hit = any_end({"ate", "iti"}); break;
            case 'u': hit = any_end({"ous"}); break;
            case 'v': hit = any_end({"ive"}); break;
            case 'z': hit = any_end({"ize"}); break;
            default: break;
        }
        if (hit && m() > 1) k_ = j_;
    }

    void step5() {
        j_ = k_;
        if (b_[k_] == 'e') {
            const int a = m();
            if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
        }
        if (b_[k_] == 'l' && double_c(k_) && m() > 1) --k_;
    }
};

}  // namespace

std::string porter_stem(std::string_view word) {
    if (!std::all_of(word.begin(), word.end(), [](char c) { return c >= 'a' && c <= 'z'; })) return std::string(word);
    return Stemmer(word).run();
}

}  // namespace ooc::metrics
