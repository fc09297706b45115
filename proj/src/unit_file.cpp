#include <splitsolve/unit_file.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace splitsolve {

using nlohmann::json;

namespace {
    auto literal_to_json(const Literal & l) -> json
    {
        return json::array({l.var, op_symbol(l.op), l.value});
    }

    auto constraint_to_json(const Constraint & c) -> json
    {
        return std::visit(
            [](const auto & k) -> json {
                using K = std::decay_t<decltype(k)>;
                json j;
                if constexpr (std::is_same_v<K, Element>) {
                    j["kind"] = "element";
                    j["result"] = k.result;
                    j["list"] = k.list;
                    j["index"] = k.index;
                }
                else if constexpr (std::is_same_v<K, UnaryBound>) {
                    j["kind"] = "unary_bound";
                    j["var"] = k.var;
                    j["op"] = op_symbol(k.op);
                    j["value"] = k.value;
                }
                else if constexpr (std::is_same_v<K, LexLeaderMapped>) {
                    j["kind"] = "lex_leader";
                    j["flat"] = k.flat;
                    j["position_map"] = k.position_map;
                    j["value_map"] = k.value_map;
                }
                else if constexpr (std::is_same_v<K, FrontierDisjunction>) {
                    j["kind"] = "frontier";
                    json regions = json::array();
                    for (auto & r : k.regions) {
                        json lits = json::array();
                        for (auto & l : r.literals)
                            lits.push_back(literal_to_json(l));
                        regions.push_back(std::move(lits));
                    }
                    j["regions"] = std::move(regions);
                }
                else {
                    j["kind"] = "nonzero_witness";
                    j["vars"] = k.vars;
                }
                return j;
            },
            c);
    }

    // Field accessors that report where in the document decoding failed.
    class Reader {
    public:
        [[noreturn]] static void fail(const std::string & where, const std::string & what)
        {
            throw UnitFormatError(where + ": " + what);
        }

        static auto field(const json & obj, const std::string & where, const char * key) -> const json &
        {
            if (! obj.is_object())
                fail(where, "expected an object");
            auto it = obj.find(key);
            if (it == obj.end())
                fail(where, std::string("missing field '") + key + "'");
            return *it;
        }

        static auto integer(const json & v, const std::string & where) -> long long
        {
            if (! v.is_number_integer())
                fail(where, "expected an integer");
            return v.get<long long>();
        }

        static auto small_int(const json & v, const std::string & where) -> int
        {
            long long x = integer(v, where);
            if (x < -(1LL << 30) || x > (1LL << 30))
                fail(where, "integer out of range");
            return static_cast<int>(x);
        }

        static auto int_array(const json & v, const std::string & where) -> std::vector<int>
        {
            if (! v.is_array())
                fail(where, "expected an array");
            std::vector<int> out;
            out.reserve(v.size());
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(small_int(v[i], where + "[" + std::to_string(i) + "]"));
            return out;
        }

        static auto string(const json & v, const std::string & where) -> std::string
        {
            if (! v.is_string())
                fail(where, "expected a string");
            return v.get<std::string>();
        }

        static auto op(const json & v, const std::string & where) -> Op
        {
            auto o = parse_op(string(v, where));
            if (! o)
                fail(where, "unknown operator '" + v.get<std::string>() + "'");
            return *o;
        }
    };

    auto literal_from_json(const json & v, const std::string & where) -> Literal
    {
        if (! v.is_array() || v.size() != 3)
            Reader::fail(where, "expected a literal [var, op, value]");
        return Literal{Reader::small_int(v[0], where + "[0]"), Reader::op(v[1], where + "[1]"),
            Reader::small_int(v[2], where + "[2]")};
    }

    auto constraint_from_json(const json & j, const std::string & where) -> Constraint
    {
        auto kind = Reader::string(Reader::field(j, where, "kind"), where + ".kind");
        auto f = [&](const char * key) -> const json & { return Reader::field(j, where, key); };
        auto at = [&](const char * key) { return where + "." + key; };

        if (kind == "element")
            return Element{Reader::small_int(f("result"), at("result")), Reader::int_array(f("list"), at("list")),
                Reader::small_int(f("index"), at("index"))};
        if (kind == "unary_bound")
            return UnaryBound{Reader::small_int(f("var"), at("var")), Reader::op(f("op"), at("op")),
                Reader::small_int(f("value"), at("value"))};
        if (kind == "lex_leader")
            return LexLeaderMapped{Reader::int_array(f("flat"), at("flat")),
                Reader::int_array(f("position_map"), at("position_map")),
                Reader::int_array(f("value_map"), at("value_map"))};
        if (kind == "frontier") {
            const json & regions = f("regions");
            if (! regions.is_array())
                Reader::fail(at("regions"), "expected an array");
            FrontierDisjunction fd;
            for (std::size_t r = 0; r < regions.size(); ++r) {
                std::string rw = at("regions") + "[" + std::to_string(r) + "]";
                if (! regions[r].is_array())
                    Reader::fail(rw, "expected an array of literals");
                Region region;
                for (std::size_t l = 0; l < regions[r].size(); ++l)
                    region.literals.push_back(literal_from_json(regions[r][l], rw + "[" + std::to_string(l) + "]"));
                fd.regions.push_back(std::move(region));
            }
            return fd;
        }
        if (kind == "nonzero_witness")
            return NonZeroWitness{Reader::int_array(f("vars"), at("vars"))};
        Reader::fail(where + ".kind", "unknown constraint kind '" + kind + "'");
    }

    auto contains_object(const json & v) -> bool
    {
        if (v.is_object())
            return true;
        if (v.is_array())
            for (auto & e : v)
                if (contains_object(e))
                    return true;
        return false;
    }

    void write_canonical(std::ostringstream & out, const json & v, int indent)
    {
        auto pad = [&](int n) {
            for (int i = 0; i < n; ++i)
                out << "  ";
        };
        if (v.is_object()) {
            if (v.empty()) {
                out << "{}";
                return;
            }
            out << "{\n";
            std::size_t i = 0;
            for (auto it = v.begin(); it != v.end(); ++it, ++i) {
                pad(indent + 1);
                out << json(it.key()).dump() << ": ";
                write_canonical(out, it.value(), indent + 1);
                out << (i + 1 < v.size() ? ",\n" : "\n");
            }
            pad(indent);
            out << "}";
        }
        else if (v.is_array() && ! contains_object(v)) {
            out << v.dump();
        }
        else if (v.is_array()) {
            out << "[\n";
            for (std::size_t i = 0; i < v.size(); ++i) {
                pad(indent + 1);
                write_canonical(out, v[i], indent + 1);
                out << (i + 1 < v.size() ? ",\n" : "\n");
            }
            pad(indent);
            out << "]";
        }
        else {
            out << v.dump();
        }
    }

    auto line_of(std::string_view text, std::size_t byte) -> std::size_t
    {
        std::size_t line = 1;
        for (std::size_t i = 0; i < byte && i < text.size(); ++i)
            if (text[i] == '\n')
                ++line;
        return line;
    }
}

auto model_to_json(const Model & model) -> json
{
    json doc;
    doc["format_version"] = kUnitFormatVersion;

    json lineage;
    if (model.lineage) {
        lineage["unit_id"] = model.lineage->unit_id;
        lineage["parent_id"] = model.lineage->parent_id ? json(*model.lineage->parent_id) : json(nullptr);
        lineage["root_id"] = model.lineage->root_id;
    }
    doc["lineage"] = model.lineage ? lineage : json(nullptr);

    json vars = json::array();
    for (auto & v : model.variables)
        vars.push_back(json{{"id", v.id}, {"name", v.name}, {"domain", v.domain.values()}});
    doc["variables"] = std::move(vars);

    json cons = json::array();
    for (auto & c : model.constraints)
        cons.push_back(constraint_to_json(c));
    doc["constraints"] = std::move(cons);

    doc["options"] = json{{"budget_ms", model.options.budget_ms}, {"arity", model.options.arity}};
    return doc;
}

auto model_from_json(const json & doc) -> Model
{
    const std::string top = "unit";
    auto version = Reader::integer(Reader::field(doc, top, "format_version"), "format_version");
    if (version != kUnitFormatVersion)
        Reader::fail("format_version", "unsupported version " + std::to_string(version));

    Model m;

    const json & lineage = Reader::field(doc, top, "lineage");
    if (! lineage.is_null()) {
        LineageTag tag;
        tag.unit_id = Reader::string(Reader::field(lineage, "lineage", "unit_id"), "lineage.unit_id");
        const json & parent = Reader::field(lineage, "lineage", "parent_id");
        if (! parent.is_null())
            tag.parent_id = Reader::string(parent, "lineage.parent_id");
        tag.root_id = Reader::string(Reader::field(lineage, "lineage", "root_id"), "lineage.root_id");
        m.lineage = std::move(tag);
    }

    const json & vars = Reader::field(doc, top, "variables");
    if (! vars.is_array())
        Reader::fail("variables", "expected an array");
    for (std::size_t i = 0; i < vars.size(); ++i) {
        std::string where = "variables[" + std::to_string(i) + "]";
        Variable v;
        v.id = Reader::small_int(Reader::field(vars[i], where, "id"), where + ".id");
        v.name = Reader::string(Reader::field(vars[i], where, "name"), where + ".name");
        for (int x : Reader::int_array(Reader::field(vars[i], where, "domain"), where + ".domain")) {
            if (x < 0 || x >= kDomainCapacity)
                Reader::fail(where + ".domain", "value " + std::to_string(x) + " outside 0.." + std::to_string(kDomainCapacity - 1));
            v.domain.insert(x);
        }
        m.variables.push_back(std::move(v));
    }

    const json & cons = Reader::field(doc, top, "constraints");
    if (! cons.is_array())
        Reader::fail("constraints", "expected an array");
    for (std::size_t i = 0; i < cons.size(); ++i)
        m.constraints.push_back(constraint_from_json(cons[i], "constraints[" + std::to_string(i) + "]"));

    const json & opts = Reader::field(doc, top, "options");
    m.options.budget_ms = Reader::integer(Reader::field(opts, "options", "budget_ms"), "options.budget_ms");
    m.options.arity = Reader::small_int(Reader::field(opts, "options", "arity"), "options.arity");

    if (auto report = validate_model(m); ! report.ok())
        throw InvalidModel(report);
    return m;
}

auto canonical_text(const json & doc) -> std::string
{
    std::ostringstream out;
    write_canonical(out, doc, 0);
    out << "\n";
    return out.str();
}

auto serialize_model(const Model & model) -> std::string
{
    return canonical_text(model_to_json(model));
}

auto parse_model(std::string_view text) -> Model
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    }
    catch (const json::parse_error & e) {
        throw UnitFormatError("line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    return model_from_json(doc);
}

void write_file_atomic(const std::filesystem::path & path, std::string_view contents)
{
    auto tmp = path;
    static std::atomic<unsigned> counter{0};
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (! out)
            throw std::system_error(errno, std::generic_category(), "cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (! out)
            throw std::system_error(errno, std::generic_category(), "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

auto read_file(const std::filesystem::path & path) -> std::string
{
    std::ifstream in(path, std::ios::binary);
    if (! in)
        throw std::system_error(errno ? errno : ENOENT, std::generic_category(), "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_unit(const Model & model, const std::filesystem::path & path)
{
    if (auto report = validate_model(model); ! report.ok())
        throw InvalidModel(report);
    write_file_atomic(path, serialize_model(model));
}

auto read_unit(const std::filesystem::path & path) -> Model
{
    auto text = read_file(path);
    try {
        return parse_model(text);
    }
    catch (const UnitFormatError & e) {
        throw UnitFormatError(path.string() + ": " + e.what());
    }
}

auto content_digest(std::string_view bytes) -> std::string
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace splitsolve
