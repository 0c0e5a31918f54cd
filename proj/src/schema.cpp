#include "worldsync/schema.hpp"

#include "worldsync/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace worldsync::schema {

namespace {

    struct Line {
        int number = 0;
        std::vector<std::string> tokens;
    };

    std::vector<Line> tokenize(std::string_view text)
    {
        std::vector<Line> lines;
        int number = 0;
        size_t pos = 0;
        while (pos <= text.size()) {
            const size_t eol = text.find('\n', pos);
            std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
            ++number;
            if (const size_t hash = raw.find('#'); hash != std::string_view::npos)
                raw = raw.substr(0, hash);
            Line line;
            line.number = number;
            size_t i = 0;
            while (i < raw.size()) {
                while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\r'))
                    ++i;
                const size_t start = i;
                while (i < raw.size() && raw[i] != ' ' && raw[i] != '\t' && raw[i] != '\r')
                    ++i;
                if (i > start)
                    line.tokens.emplace_back(raw.substr(start, i - start));
            }
            if (!line.tokens.empty())
                lines.push_back(std::move(line));
            if (eol == std::string_view::npos)
                break;
            pos = eol + 1;
        }
        return lines;
    }

    [[noreturn]] void syntax_error(int line, const std::string& reason)
    {
        raise(Errc::syntax_error, "line " + std::to_string(line) + ": " + reason);
    }

    uint64_t parse_uint(const Line& line, std::string_view token, uint64_t max)
    {
        uint64_t out = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
        if (ec != std::errc {} || ptr != token.data() + token.size() || out > max)
            syntax_error(line.number, "expected integer in 0.." + std::to_string(max) + ", got '" + std::string(token) + "'");
        return out;
    }

    // "id=7" -> 7
    uint64_t parse_field(const Line& line, std::string_view token, std::string_view name, uint64_t max)
    {
        const std::string prefix = std::string(name) + "=";
        if (token.substr(0, prefix.size()) != prefix)
            syntax_error(line.number, "expected '" + prefix + "...', got '" + std::string(token) + "'");
        return parse_uint(line, token.substr(prefix.size()), max);
    }

    ValueKind parse_kind(const Line& line, std::string_view token)
    {
        const auto kind = kind_from_name(token);
        if (!kind)
            raise(Errc::unknown_kind, "line " + std::to_string(line.number) + ": '" + std::string(token) + "'");
        return *kind;
    }

    std::vector<ValueKind> parse_params(const Line& line, std::string_view token)
    {
        if (token.substr(0, 8) != "params=(" || token.back() != ')')
            syntax_error(line.number, "expected 'params=(...)', got '" + std::string(token) + "'");
        std::string_view inner = token.substr(8, token.size() - 9);
        std::vector<ValueKind> params;
        while (!inner.empty()) {
            const size_t comma = inner.find(',');
            const std::string_view item = inner.substr(0, comma);
            if (item.empty())
                syntax_error(line.number, "empty parameter kind");
            params.push_back(parse_kind(line, item));
            if (comma == std::string_view::npos)
                break;
            inner = inner.substr(comma + 1);
        }
        return params;
    }

} // namespace

const PropertyDef* ClassDef::find_property(uint16_t prop_id) const
{
    for (const auto& prop : properties)
        if (prop.prop_id == prop_id)
            return &prop;
    return nullptr;
}

const PropertyDef* ClassDef::find_property(std::string_view key) const
{
    for (const auto& prop : properties)
        if (prop.key == key)
            return &prop;
    return nullptr;
}

Schema parse_schema(std::string_view text)
{
    Schema schema;
    ClassDef* open_class = nullptr;

    for (const Line& line : tokenize(text)) {
        const std::string& head = line.tokens[0];
        if (head == "version") {
            if (line.tokens.size() != 2)
                syntax_error(line.number, "expected 'version <n>'");
            schema.version = static_cast<uint32_t>(parse_uint(line, line.tokens[1], UINT32_MAX));
        } else if (head == "class") {
            if (open_class)
                syntax_error(line.number, "nested class declaration (missing 'end'?)");
            if (line.tokens.size() != 3)
                syntax_error(line.number, "expected 'class <Name> id=<n>'");
            ClassDef cls;
            cls.name = line.tokens[1];
            cls.class_id = static_cast<uint16_t>(parse_field(line, line.tokens[2], "id", UINT16_MAX));
            for (const auto& existing : schema.classes) {
                if (existing.name == cls.name)
                    raise(Errc::duplicate_id, "class name '" + cls.name + "'");
                if (existing.class_id == cls.class_id)
                    raise(Errc::duplicate_id, "class id " + std::to_string(cls.class_id));
            }
            schema.classes.push_back(std::move(cls));
            open_class = &schema.classes.back();
        } else if (head == "prop") {
            if (!open_class)
                syntax_error(line.number, "'prop' outside class block");
            if (line.tokens.size() != 4 && line.tokens.size() != 5)
                syntax_error(line.number, "expected 'prop <key> id=<n> kind=<kind> [replicated]'");
            PropertyDef prop;
            prop.key = line.tokens[1];
            prop.prop_id = static_cast<uint16_t>(parse_field(line, line.tokens[2], "id", UINT16_MAX));
            const std::string& kind_field = line.tokens[3];
            if (kind_field.substr(0, 5) != "kind=")
                syntax_error(line.number, "expected 'kind=<kind>'");
            prop.kind = parse_kind(line, std::string_view(kind_field).substr(5));
            if (line.tokens.size() == 5) {
                if (line.tokens[4] != "replicated")
                    syntax_error(line.number, "unexpected token '" + line.tokens[4] + "'");
                prop.replicated = true;
            }
            open_class->properties.push_back(std::move(prop));
        } else if (head == "end") {
            if (!open_class)
                syntax_error(line.number, "'end' without open class");
            if (line.tokens.size() != 1)
                syntax_error(line.number, "unexpected tokens after 'end'");
            open_class = nullptr;
        } else if (head == "rpc") {
            if (open_class)
                syntax_error(line.number, "'rpc' inside class block (missing 'end'?)");
            if (line.tokens.size() != 6)
                syntax_error(line.number, "expected 'rpc <Name> id=<n> params=(...) returns=<kind|none> mode=<unary|stream>'");
            MethodDef method;
            method.name = line.tokens[1];
            method.method_id = static_cast<uint16_t>(parse_field(line, line.tokens[2], "id", UINT16_MAX));
            method.params = parse_params(line, line.tokens[3]);
            const std::string& ret = line.tokens[4];
            if (ret.substr(0, 8) != "returns=")
                syntax_error(line.number, "expected 'returns=<kind|none>'");
            if (const std::string_view ret_kind = std::string_view(ret).substr(8); ret_kind != "none")
                method.returns = parse_kind(line, ret_kind);
            const std::string& mode = line.tokens[5];
            if (mode == "mode=unary")
                method.mode = MethodMode::Unary;
            else if (mode == "mode=stream")
                method.mode = MethodMode::ServerStream;
            else
                syntax_error(line.number, "expected 'mode=unary' or 'mode=stream'");
            for (const auto& existing : schema.methods)
                if (existing.method_id == method.method_id)
                    raise(Errc::duplicate_id, "method id " + std::to_string(method.method_id));
            schema.methods.push_back(std::move(method));
        } else {
            syntax_error(line.number, "unknown directive '" + head + "'");
        }
    }
    if (open_class)
        syntax_error(0, "unterminated class '" + open_class->name + "' (missing 'end')");
    return schema;
}

std::vector<std::string> validate_schema(const Schema& schema)
{
    std::vector<std::string> violations;
    std::set<std::string> class_names;
    std::set<uint16_t> class_ids;

    for (const auto& cls : schema.classes) {
        if (!class_names.insert(cls.name).second)
            violations.push_back("duplicate class name '" + cls.name + "'");
        if (!class_ids.insert(cls.class_id).second)
            violations.push_back("duplicate class id " + std::to_string(cls.class_id));
        std::set<std::string> keys;
        std::set<uint16_t> prop_ids;
        for (const auto& prop : cls.properties) {
            if (!keys.insert(prop.key).second)
                violations.push_back("class '" + cls.name + "': duplicate property key '" + prop.key + "'");
            if (!prop_ids.insert(prop.prop_id).second)
                violations.push_back("class '" + cls.name + "': duplicate prop id " + std::to_string(prop.prop_id));
            if (!valid_kind(static_cast<uint8_t>(prop.kind)))
                violations.push_back("class '" + cls.name + "': property '" + prop.key + "' has invalid kind tag "
                    + std::to_string(static_cast<unsigned>(prop.kind)));
        }
    }

    std::set<uint16_t> method_ids;
    for (const auto& method : schema.methods) {
        if (!method_ids.insert(method.method_id).second)
            violations.push_back("duplicate method id " + std::to_string(method.method_id));
        for (size_t i = 0; i < method.params.size(); ++i)
            if (!valid_kind(static_cast<uint8_t>(method.params[i])))
                violations.push_back("method '" + method.name + "': param " + std::to_string(i) + " has invalid kind tag");
        if (method.returns && !valid_kind(static_cast<uint8_t>(*method.returns)))
            violations.push_back("method '" + method.name + "': return has invalid kind tag");
        if (method.mode == MethodMode::ServerStream && !method.returns)
            violations.push_back("stream method '" + method.name + "' (id " + std::to_string(method.method_id)
                + ") must declare a return kind");
    }
    return violations;
}

const MethodDef* lookup_method(const Schema& schema, uint16_t method_id)
{
    for (const auto& method : schema.methods)
        if (method.method_id == method_id)
            return &method;
    return nullptr;
}

const ClassDef* lookup_class(const Schema& schema, uint16_t class_id)
{
    for (const auto& cls : schema.classes)
        if (cls.class_id == class_id)
            return &cls;
    return nullptr;
}

const ClassDef* lookup_class(const Schema& schema, std::string_view name)
{
    for (const auto& cls : schema.classes)
        if (cls.name == name)
            return &cls;
    return nullptr;
}

std::string print_schema(const Schema& schema)
{
    std::ostringstream out;
    out << "version " << schema.version << "\n";
    for (const auto& cls : schema.classes) {
        out << "class " << cls.name << " id=" << cls.class_id << "\n";
        for (const auto& prop : cls.properties) {
            out << "  prop " << prop.key << " id=" << prop.prop_id << " kind=" << kind_name(prop.kind);
            if (prop.replicated)
                out << " replicated";
            out << "\n";
        }
        out << "end\n";
    }
    for (const auto& method : schema.methods) {
        out << "rpc " << method.name << " id=" << method.method_id << " params=(";
        for (size_t i = 0; i < method.params.size(); ++i) {
            if (i)
                out << ",";
            out << kind_name(method.params[i]);
        }
        out << ") returns=" << (method.returns ? kind_name(*method.returns) : "none");
        out << " mode=" << (method.mode == MethodMode::Unary ? "unary" : "stream") << "\n";
    }
    return out.str();
}

Schema load_schema_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        raise(Errc::invalid_argument, "cannot open schema file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str());
}

} // namespace worldsync::schema
