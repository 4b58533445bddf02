#include "dmrg/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "dmrg/errors.hpp"

namespace dmrg {

struct Expression::Node {
    enum class Op { constant, x, t, z, y, add, sub, mul, div, neg, pow, tanh, relu, abs, sin, min, max };
    Op op;
    double value = 0.0;
    int index = 0;
    std::vector<std::shared_ptr<const Node>> args;

    double eval(const ExprVars& v) const {
        auto a = [&](std::size_t i) { return args[i]->eval(v); };
        switch (op) {
            case Op::constant: return value;
            case Op::x: return v.x;
            case Op::t: return v.t;
            case Op::z: return v.z;
            case Op::y: return v.y[static_cast<std::size_t>(index)];
            case Op::add: return a(0) + a(1);
            case Op::sub: return a(0) - a(1);
            case Op::mul: return a(0) * a(1);
            case Op::div: return a(0) / a(1);
            case Op::neg: return -a(0);
            case Op::pow: return std::pow(a(0), a(1));
            case Op::tanh: return std::tanh(a(0));
            case Op::relu: return std::max(a(0), 0.0);
            case Op::abs: return std::abs(a(0));
            case Op::sin: return std::sin(a(0));
            case Op::min: return std::min(a(0), a(1));
            case Op::max: return std::max(a(0), a(1));
        }
        return 0.0;
    }
};

namespace {

using Node = Expression::Node;
using Ptr = std::shared_ptr<const Node>;

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    Ptr run() {
        Ptr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

    int max_component = 0;
    bool uses_z = false;

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw InvalidInput("expression '" + s_ + "' column " + std::to_string(pos_ + 1) + ": " + msg);
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    static Ptr make(Node::Op op, std::vector<Ptr> args = {}, double value = 0.0, int index = 0) {
        return std::make_shared<const Node>(Node{op, value, index, std::move(args)});
    }

    Ptr expr() {
        Ptr lhs = term();
        for (;;) {
            if (eat('+')) lhs = make(Node::Op::add, {lhs, term()});
            else if (eat('-')) lhs = make(Node::Op::sub, {lhs, term()});
            else return lhs;
        }
    }
    Ptr term() {
        Ptr lhs = unary();
        for (;;) {
            if (eat('*')) lhs = make(Node::Op::mul, {lhs, unary()});
            else if (eat('/')) lhs = make(Node::Op::div, {lhs, unary()});
            else return lhs;
        }
    }
    Ptr unary() {
        if (eat('-')) return make(Node::Op::neg, {unary()});
        if (eat('+')) return unary();
        return power();
    }
    Ptr power() {
        Ptr base = atom();
        if (eat('^')) return make(Node::Op::pow, {base, unary()});
        return base;
    }
    Ptr atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Ptr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }
    Ptr number() {
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ += static_cast<std::size_t>(end - begin);
        return make(Node::Op::constant, {}, v);
    }
    Ptr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        const std::string name = s_.substr(start, pos_ - start);
        if (name == "x") return make(Node::Op::x);
        if (name == "t") return make(Node::Op::t);
        if (name == "z") {
            uses_z = true;
            return make(Node::Op::z);
        }
        if (name == "y" || (name.size() == 2 && name[0] == 'y' && name[1] >= '1' && name[1] <= '9')) {
            const int idx = name.size() == 1 ? 0 : name[1] - '1';
            max_component = std::max(max_component, idx + 1);
            return make(Node::Op::y, {}, 0.0, idx);
        }
        struct Fn {
            const char* name;
            Node::Op op;
            int arity;
        };
        static constexpr Fn fns[] = {{"tanh", Node::Op::tanh, 1}, {"relu", Node::Op::relu, 1}, {"abs", Node::Op::abs, 1},
                                     {"sin", Node::Op::sin, 1},   {"min", Node::Op::min, 2},   {"max", Node::Op::max, 2},
                                     {"pow", Node::Op::pow, 2}};
        for (const Fn& f : fns) {
            if (name != f.name) continue;
            if (!eat('(')) fail("expected '(' after " + name);
            std::vector<Ptr> args{expr()};
            while (eat(',')) args.push_back(expr());
            if (!eat(')')) fail("expected ')'");
            if (static_cast<int>(args.size()) != f.arity) {
                fail(name + " takes " + std::to_string(f.arity) + " argument(s)");
            }
            return make(f.op, std::move(args));
        }
        pos_ = start;
        fail("unknown identifier '" + name + "'");
    }
};

}  // namespace

Expression Expression::parse(const std::string& text) {
    Expression e;
    e.text_ = text;
    std::string body = text;
    const auto first = body.find_first_not_of(" \t");
    if (first != std::string::npos && body.compare(first, 2, "c:") == 0) {
        const std::string rest = body.substr(first + 2);
        char* end = nullptr;
        const double v = std::strtod(rest.c_str(), &end);
        if (end == rest.c_str() || rest.find_first_not_of(" \t", static_cast<std::size_t>(end - rest.c_str())) != std::string::npos) {
            throw InvalidInput("expression '" + text + "': bad constant");
        }
        e.root_ = std::make_shared<const Node>(Node{Node::Op::constant, v, 0, {}});
        return e;
    }
    Parser p(text);
    e.root_ = p.run();
    e.max_component_ = p.max_component;
    e.uses_z_ = p.uses_z;
    return e;
}

double Expression::operator()(const ExprVars& v) const { return root_->eval(v); }

double Expression::operator()(double x, double t) const {
    ExprVars v;
    v.x = x;
    v.t = t;
    return root_->eval(v);
}

}  // namespace dmrg
