#pragma once

// Porter stemmer, following Martin Porter's ANSI C reference implementation
// (including its two departures from the 1980 paper: "bli" -> "ble" and
// "logi" -> "log" in step 2). Input is expected lowercase ASCII; words of
// length <= 2 are returned unchanged.

#include <string>
#include <string_view>

namespace metasearch {

class PorterStemmer {
public:
    std::string operator()(std::string_view word) const {
        if (word.size() <= 2) return std::string(word);
        State s{std::string(word), static_cast<int>(word.size()) - 1, 0};
        step1ab(s);
        if (s.k > 0) {
            step1c(s);
            step2(s);
            step3(s);
            step4(s);
            step5(s);
        }
        s.b.resize(static_cast<std::size_t>(s.k) + 1);
        return s.b;
    }

private:
    // b[0..k] is the word being stemmed; j marks the end of a matched stem.
    struct State {
        std::string b;
        int k;
        int j;
    };

    static bool cons(const State& s, int i) {
        switch (s.b[static_cast<std::size_t>(i)]) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !cons(s, i - 1);
            default: return true;
        }
    }

    // Number of VC sequences in b[0..j].
    static int m(const State& s) {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > s.j) return n;
            if (!cons(s, i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > s.j) return n;
                if (cons(s, i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > s.j) return n;
                if (!cons(s, i)) break;
                ++i;
            }
            ++i;
        }
    }

    static bool vowel_in_stem(const State& s) {
        for (int i = 0; i <= s.j; ++i)
            if (!cons(s, i)) return true;
        return false;
    }

    static bool doublec(const State& s, int j) {
        if (j < 1) return false;
        if (s.b[static_cast<std::size_t>(j)] != s.b[static_cast<std::size_t>(j - 1)]) return false;
        return cons(s, j);
    }

    // cvc(i): b[i-2..i] is consonant-vowel-consonant and the final consonant
    // is not w, x or y.
    static bool cvc(const State& s, int i) {
        if (i < 2 || !cons(s, i) || cons(s, i - 1) || !cons(s, i - 2)) return false;
        const char ch = s.b[static_cast<std::size_t>(i)];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    static bool ends(State& s, std::string_view suffix) {
        const int len = static_cast<int>(suffix.size());
        if (len > s.k + 1) return false;
        if (std::string_view(s.b).substr(static_cast<std::size_t>(s.k - len + 1), suffix.size()) != suffix)
            return false;
        s.j = s.k - len;
        return true;
    }

    static void setto(State& s, std::string_view replacement) {
        s.b.replace(static_cast<std::size_t>(s.j + 1), static_cast<std::size_t>(s.k - s.j), replacement);
        s.k = s.j + static_cast<int>(replacement.size());
    }

    static void r(State& s, std::string_view replacement) {
        if (m(s) > 0) setto(s, replacement);
    }

    static void step1ab(State& s) {
        if (s.b[static_cast<std::size_t>(s.k)] == 's') {
            if (ends(s, "sses")) {
                s.k -= 2;
            } else if (ends(s, "ies")) {
                setto(s, "i");
            } else if (s.b[static_cast<std::size_t>(s.k - 1)] != 's') {
                --s.k;
            }
        }
        if (ends(s, "eed")) {
            if (m(s) > 0) --s.k;
        } else if ((ends(s, "ed") || ends(s, "ing")) && vowel_in_stem(s)) {
            s.k = s.j;
            if (ends(s, "at")) {
                setto(s, "ate");
            } else if (ends(s, "bl")) {
                setto(s, "ble");
            } else if (ends(s, "iz")) {
                setto(s, "ize");
            } else if (doublec(s, s.k)) {
                --s.k;
                const char ch = s.b[static_cast<std::size_t>(s.k)];
                if (ch == 'l' || ch == 's' || ch == 'z') ++s.k;
            } else if (m(s) == 1 && cvc(s, s.k)) {
                setto(s, "e");
            }
        }
    }

    static void step1c(State& s) {
        if (ends(s, "y") && vowel_in_stem(s)) s.b[static_cast<std::size_t>(s.k)] = 'i';
    }

    static void step2(State& s) {
        if (s.k < 1) return;
        switch (s.b[static_cast<std::size_t>(s.k - 1)]) {
            case 'a':
                if (ends(s, "ational")) { r(s, "ate"); break; }
                if (ends(s, "tional")) { r(s, "tion"); break; }
                break;
            case 'c':
                if (ends(s, "enci")) { r(s, "ence"); break; }
                if (ends(s, "anci")) { r(s, "ance"); break; }
                break;
            case 'e':
                if (ends(s, "izer")) { r(s, "ize"); break; }
                break;
            case 'l':
                if (ends(s, "bli")) { r(s, "ble"); break; }
                if (ends(s, "alli")) { r(s, "al"); break; }
                if (ends(s, "entli")) { r(s, "ent"); break; }
                if (ends(s, "eli")) { r(s, "e"); break; }
                if (ends(s, "ousli")) { r(s, "ous"); break; }
                break;
            case 'o':
                if (ends(s, "ization")) { r(s, "ize"); break; }
                if (ends(s, "ation")) { r(s, "ate"); break; }
                if (ends(s, "ator")) { r(s, "ate"); break; }
                break;
            case 's':
                if (ends(s, "alism")) { r(s, "al"); break; }
                if (ends(s, "iveness")) { r(s, "ive"); break; }
                if (ends(s, "fulness")) { r(s, "ful"); break; }
                if (ends(s, "ousness")) { r(s, "ous"); break; }
                break;
            case 't':
                if (ends(s, "aliti")) { r(s, "al"); break; }
                if (ends(s, "iviti")) { r(s, "ive"); break; }
                if (ends(s, "biliti")) { r(s, "ble"); break; }
                break;
            case 'g':
                if (ends(s, "logi")) { r(s, "log"); break; }
                break;
            default:
                break;
        }
    }

    static void step3(State& s) {
        switch (s.b[static_cast<std::size_t>(s.k)]) {
            case 'e':
                if (ends(s, "icate")) { r(s, "ic"); break; }
                if (ends(s, "ative")) { r(s, ""); break; }
                if (ends(s, "alize")) { r(s, "al"); break; }
                break;
            case 'i':
                if (ends(s, "iciti")) { r(s, "ic"); break; }
                break;
            case 'l':
                if (ends(s, "ical")) { r(s, "ic"); break; }
                if (ends(s, "ful")) { r(s, ""); break; }
                break;
            case 's':
                if (ends(s, "ness")) { r(s, ""); break; }
                break;
            default:
                break;
        }
    }

    static void step4(State& s) {
        if (s.k < 1) return;
        switch (s.b[static_cast<std::size_t>(s.k - 1)]) {
            case 'a':
                if (ends(s, "al")) break;
                return;
            case 'c':
                if (ends(s, "ance")) break;
                if (ends(s, "ence")) break;
                return;
            case 'e':
                if (ends(s, "er")) break;
                return;
            case 'i':
                if (ends(s, "ic")) break;
                return;
            case 'l':
                if (ends(s, "able")) break;
                if (ends(s, "ible")) break;
                return;
            case 'n':
                if (ends(s, "ant")) break;
                if (ends(s, "ement")) break;
                if (ends(s, "ment")) break;
                if (ends(s, "ent")) break;
                return;
            case 'o':
                if (ends(s, "ion") && s.j >= 0 &&
                    (s.b[static_cast<std::size_t>(s.j)] == 's' || s.b[static_cast<std::size_t>(s.j)] == 't'))
                    break;
                if (ends(s, "ou")) break;
                return;
            case 's':
                if (ends(s, "ism")) break;
                return;
            case 't':
                if (ends(s, "ate")) break;
                if (ends(s, "iti")) break;
                return;
            case 'u':
                if (ends(s, "ous")) break;
                return;
            case 'v':
                if (ends(s, "ive")) break;
                return;
            case 'z':
                if (ends(s, "ize")) break;
                return;
            default:
                return;
        }
        if (m(s) > 1) s.k = s.j;
    }

    static void step5(State& s) {
        s.j = s.k;
        if (s.b[static_cast<std::size_t>(s.k)] == 'e') {
            const int a = m(s);
            if (a > 1 || (a == 1 && !cvc(s, s.k - 1))) --s.k;
        }
        if (s.b[static_cast<std::size_t>(s.k)] == 'l' && doublec(s, s.k) && m(s) > 1) --s.k;
    }
};

inline std::string porter_stem(std::string_view word) { return PorterStemmer{}(word); }

}  // namespace metasearch
