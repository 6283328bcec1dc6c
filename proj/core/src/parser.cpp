#include "bondflow/dsl.hpp"
#include "bondflow/lexer.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace bondflow {

namespace {

struct SyntaxError {
    std::string message;
    SourceLocation location;
};

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)), graph_("model") {}

    ParseResult run() {
        ParseResult result;
        while (true) {
            skip_newlines();
            if (peek().kind == TokenKind::End) break;
            try {
                statement();
                if (peek().kind != TokenKind::Newline && peek().kind != TokenKind::End) {
                    fail("unexpected " + describe(peek()) + " at end of statement");
                }
            } catch (const SyntaxError& err) {
                errors_.push_back({err.message, err.location});
                recover();
            }
        }
        if (!seen_model_ && !missing_model_reported_) {
            errors_.push_back({"missing 'model <name>' header", peek().location});
        }
        result.errors = std::move(errors_);
        if (result.errors.empty()) {
            result.diagnostics = validate(graph_);
            result.graph = std::move(graph_);
        }
        return result;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }
    const Token& take() {
        const Token& t = peek();
        if (pos_ < tokens_.size() - 1) ++pos_;
        return t;
    }

    static std::string describe(const Token& t) {
        switch (t.kind) {
            case TokenKind::End: return "end of input";
            case TokenKind::Newline: return "end of line";
            case TokenKind::String: return "string \"" + t.text + "\"";
            default: return "'" + t.text + "'";
        }
    }

    [[noreturn]] void fail(const std::string& message) const { fail(message, peek()); }
    [[noreturn]] void fail(const std::string& message, const Token& at) const {
        if (at.kind == TokenKind::Invalid) throw SyntaxError{at.text, at.location};
        throw SyntaxError{message, at.location};
    }

    void skip_newlines() {
        while (peek().kind == TokenKind::Newline) take();
    }

    void recover() {
        while (peek().kind != TokenKind::Newline && peek().kind != TokenKind::End) take();
    }

    void expect_symbol(std::string_view s) {
        if (!peek().is_symbol(s)) fail("expected '" + std::string(s) + "', found " + describe(peek()));
        take();
    }

    std::string identifier(const char* what) {
        if (peek().kind != TokenKind::Identifier) fail(std::string("expected ") + what + ", found " + describe(peek()));
        return take().text;
    }

    bool keyword(std::string_view word) {
        if (peek().is(TokenKind::Identifier, word)) {
            take();
            return true;
        }
        return false;
    }

    Expr expression() {
        if (peek().kind == TokenKind::Invalid) fail(peek().text);
        try {
            return Expr::parse(std::span<const Token>(tokens_), pos_);
        } catch (const ExprSyntaxError& err) {
            throw SyntaxError{err.detail(), err.location()};
        }
    }

    PortRef port_ref(const char* what) {
        PortRef ref;
        ref.element = identifier(what);
        if (peek().is_symbol(".")) {
            take();
            const Token& num = peek();
            if (num.kind != TokenKind::Number || (num.text != "1" && num.text != "2")) {
                fail("expected port number 1 or 2, found " + describe(num));
            }
            ref.port = num.text == "1" ? 1 : 2;
            take();
        }
        return ref;
    }

    void statement() {
        const Token& head = peek();
        if (head.kind == TokenKind::Invalid) fail(head.text);
        if (head.kind != TokenKind::Identifier) fail("expected a statement keyword, found " + describe(head));
        const std::string word = take().text;
        if (word == "model") return model(head);
        if (!seen_model_ && !missing_model_reported_) {
            // Reported once; the rest of the file is still checked.
            errors_.push_back({"expected 'model <name>' before the first statement", head.location});
            missing_model_reported_ = true;
        }
        if (word == "element") return element();
        if (word == "bond") return bond();
        if (word == "signal") return signal();
        if (word == "param") return param();
        if (word == "probe") return probe();
        fail("unknown statement '" + word + "'", head);
    }

    void model(const Token& at) {
        if (seen_model_ || missing_model_reported_) fail("model statement must come first and only once", at);
        seen_model_ = true;
        graph_.set_name(identifier("model name"));
    }

    void element() {
        const Token& kt = peek();
        std::optional<ElementKind> kind;
        if (kt.kind == TokenKind::Identifier || (kt.kind == TokenKind::Number && (kt.text == "0" || kt.text == "1"))) {
            kind = kind_from_symbol(kt.text);
        }
        if (!kind) fail("unknown element kind " + describe(kt));
        take();
        const Token& id_tok = peek();
        Element el;
        el.kind = *kind;
        el.id = identifier("element id");
        if (peek().is_symbol("{")) attributes(el);
        if (!element_ids_.insert(el.id).second) fail("duplicate element id '" + el.id + "'", id_tok);
        graph_.add_element(std::move(el));
    }

    Parameter parameter_value() {
        if (!peek().is_symbol("[")) {
            return Parameter::scalar(expression());
        }
        take();
        if (peek().is_symbol("[")) {
            std::vector<std::vector<Expr>> rows;
            do {
                expect_symbol("[");
                std::vector<Expr> row;
                if (!peek().is_symbol("]")) {
                    row.push_back(expression());
                    while (peek().is_symbol(",")) {
                        take();
                        row.push_back(expression());
                    }
                }
                expect_symbol("]");
                if (!rows.empty() && row.size() != rows.front().size()) fail("matrix rows differ in length");
                if (row.empty()) fail("empty matrix row");
                rows.push_back(std::move(row));
                if (!peek().is_symbol(",")) break;
                take();
            } while (true);
            expect_symbol("]");
            std::vector<Expr> entries;
            for (auto& r : rows) {
                for (auto& x : r) entries.push_back(std::move(x));
            }
            const int cols = static_cast<int>(rows.front().size());
            return Parameter::matrix(static_cast<int>(rows.size()), cols, std::move(entries));
        }
        std::vector<Expr> values;
        values.push_back(expression());
        while (peek().is_symbol(",")) {
            take();
            values.push_back(expression());
        }
        expect_symbol("]");
        return Parameter::column(std::move(values));
    }

    std::string string_value() {
        if (peek().kind != TokenKind::String) fail("expected a string, found " + describe(peek()));
        return take().text;
    }

    void attributes(Element& el) {
        expect_symbol("{");
        std::set<std::string> keys;
        std::string unit;
        bool first = true;
        while (!peek().is_symbol("}")) {
            if (!first) expect_symbol(",");
            first = false;
            if (peek().is_symbol("}")) break;
            const Token& key_tok = peek();
            const std::string key = identifier("attribute name");
            const std::string canonical = key == "value" ? "k" : key;
            if (!keys.insert(canonical).second) fail("duplicate attribute '" + key + "'", key_tok);
            expect_symbol("=");
            if (canonical == "k") {
                el.parameter = parameter_value();
            } else if (key == "init") {
                el.initial = parameter_value();
            } else if (key == "causality") {
                const Token& t = peek();
                const auto mode = causality_mode_from_string(identifier("causality mode"));
                if (!mode) fail("unknown causality mode " + describe(t), t);
                el.causality = *mode;
            } else if (key == "out") {
                expect_symbol("[");
                while (!peek().is_symbol("]")) {
                    if (!el.outputs.empty()) expect_symbol(",");
                    const Token& t = peek();
                    const auto q = quantity_from_string(identifier("output quantity"));
                    if (!q) fail("unknown output quantity " + describe(t), t);
                    el.outputs.push_back(*q);
                }
                expect_symbol("]");
            } else if (key == "unit") {
                unit = string_value();
            } else if (key == "label") {
                el.label = string_value();
            } else {
                fail("unknown attribute '" + key + "'", key_tok);
            }
        }
        if (keys.count("unit")) {
            if (!el.parameter) fail("'unit' needs a parameter 'k'");
            el.parameter->unit = unit;
        }
        expect_symbol("}");
    }

    void bond() {
        const Token& id_tok = peek();
        Bond b;
        b.id = identifier("bond id");
        b.tail = port_ref("tail element");
        expect_symbol("->");
        b.head = port_ref("head element");
        for (;;) {
            if (keyword("dim")) {
                const Token& n = peek();
                if (n.kind != TokenKind::Number || n.number < 1 || n.number > 1e6 ||
                    n.number != static_cast<double>(static_cast<int>(n.number))) {
                    fail("expected a positive integer dimension, found " + describe(n));
                }
                b.dimension = static_cast<int>(n.number);
                take();
            } else if (keyword("causal")) {
                if (keyword("head")) {
                    b.stroke = StrokeEnd::AtHead;
                } else if (keyword("tail")) {
                    b.stroke = StrokeEnd::AtTail;
                } else {
                    fail("expected 'head' or 'tail', found " + describe(peek()));
                }
            } else {
                break;
            }
        }
        if (peek().is_symbol("{")) {
            take();
            bool first = true;
            while (!peek().is_symbol("}")) {
                if (!first) expect_symbol(",");
                first = false;
                if (peek().is_symbol("}")) break;
                const Token& key_tok = peek();
                const std::string key = identifier("attribute name");
                if (key != "label") fail("unknown bond attribute '" + key + "'", key_tok);
                expect_symbol("=");
                b.label = string_value();
            }
            expect_symbol("}");
        }
        if (!bond_ids_.insert(b.id).second) fail("duplicate bond id '" + b.id + "'", id_tok);
        graph_.add_bond(std::move(b));
    }

    void signal() {
        Signal s;
        s.name = identifier("signal name");
        expect_symbol("=");
        static const std::pair<const char*, SignalKind> kinds[] = {
            {"effort", SignalKind::Effort},
            {"flow", SignalKind::Flow},
            {"momentum", SignalKind::Momentum},
            {"displacement", SignalKind::Displacement},
        };
        for (const auto& [word, kind] : kinds) {
            if (peek().is(TokenKind::Identifier, word) && peek(1).is_symbol("(")) {
                take();
                take();
                s.kind = kind;
                s.target = port_ref(kind == SignalKind::Effort || kind == SignalKind::Flow ? "bond id" : "element id");
                expect_symbol(")");
                graph_.add_signal(std::move(s));
                return;
            }
        }
        s.kind = SignalKind::Expression;
        s.expression = expression();
        graph_.add_signal(std::move(s));
    }

    void param() {
        Constant c;
        c.name = identifier("param name");
        expect_symbol("=");
        c.value = expression();
        graph_.add_constant(std::move(c));
    }

    void probe() {
        Probe p;
        p.target = port_ref("probe target");
        const Token& t = peek();
        const auto q = quantity_from_string(identifier("quantity"));
        if (!q) fail("unknown quantity " + describe(t), t);
        p.quantity = *q;
        graph_.add_probe(std::move(p));
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    BondGraph graph_;
    std::vector<ParseError> errors_;
    std::set<std::string> element_ids_;
    std::set<std::string> bond_ids_;
    bool seen_model_ = false;
    bool missing_model_reported_ = false;
};

}  // namespace

ParseResult parse(std::string_view text) {
    try {
        return Parser(text).run();
    } catch (const std::exception& err) {
        ParseResult r;
        r.errors.push_back({std::string("internal parser failure: ") + err.what(), {}});
        return r;
    }
}

BondGraph load(std::string_view text) {
    ParseResult r = parse(text);
    if (r.ok()) return std::move(*r.graph);
    std::string message;
    for (const auto& e : r.errors) message += (message.empty() ? "" : "\n") + e.text();
    for (const auto& d : r.diagnostics) {
        if (d.severity == Severity::Error) message += (message.empty() ? "" : "\n") + to_string(d);
    }
    throw Error(message);
}

BondGraph load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return load(ss.str());
    } catch (const Error& err) {
        throw Error(path + ":\n" + err.what());
    }
}

}  // namespace bondflow
