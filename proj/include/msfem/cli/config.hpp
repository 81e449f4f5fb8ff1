#pragma once

// Command-line and key=value configuration for the msfemlab front end.

#include "msfem/errors.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace msfem::cli {

/// Invalid command line or configuration; maps to exit code 2.
class UsageError : public Error {
public:
    UsageError(std::string key, const std::string& what) : Error(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum class Command { solve, compare, converge, homog_check, identities };

struct RunConfig {
    Command command = Command::solve;

    std::string coefficient = "paper-periodic";
    double epsilon = std::numbers::pi / 50;
    double amplitude = 100.0;
    double a_minus = 1.0;
    double a_plus = 4.0;
    double coefficient_value = 1.0;                       // constant-scalar
    std::vector<double> matrix{1.0, 0.0, 0.0, 1.0};       // constant-matrix, row major

    std::string source = "paper-source";
    double source_value = 1.0;
    int source_k = 1;

    int n = 8;
    int r = 3;
    int n_ref = 256;
    std::vector<int> n_list{4, 8, 16, 32};
    std::vector<int> eps_divisors{8, 16, 32};
    bool n_set = false;      // n given explicitly
    bool r_set = false;      // r given explicitly
    bool n_list_set = false; // n_list given explicitly

    std::string solver = "auto";
    double tol = 1e-12;
    int maxit = 20000;

    std::string output_dir = ".";
    std::uint64_t seed = 1;
    int workers = 1;
    std::string variant = "nonintrusive";
    bool full_scale = false;

    std::vector<std::string> warnings;
};

/// Accepts a decimal number, "pi", or "pi/K".
inline double parse_epsilon(const std::string& text)
{
    auto fail = [&] { return UsageError("epsilon", "epsilon: cannot parse '" + text + "' (number, pi or pi/K)"); };
    std::string s;
    for (char c : text)
        if (c != ' ')
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s.rfind("pi", 0) == 0) {
        if (s == "pi")
            return std::numbers::pi;
        if (s.size() < 4 || s[2] != '/')
            throw fail();
        double k = 0.0;
        const auto [end, ec] = std::from_chars(s.data() + 3, s.data() + s.size(), k);
        if (ec != std::errc() || end != s.data() + s.size())
            throw fail();
        return std::numbers::pi / k;
    }
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
        throw fail();
    return v;
}

inline std::string command_name(Command c)
{
    switch (c) {
    case Command::solve: return "solve";
    case Command::compare: return "compare";
    case Command::converge: return "converge";
    case Command::homog_check: return "homog-check";
    case Command::identities: return "identities";
    }
    return "unknown";
}

inline void validate(RunConfig& c)
{
    auto require = [](bool ok, const char* key, const std::string& what) {
        if (!ok)
            throw UsageError(key, std::string(key) + ": " + what);
    };
    require(std::isfinite(c.epsilon) && c.epsilon > 0.0, "epsilon", "must be positive");
    require(c.n >= 2, "n", "must be at least 2");
    require(c.r >= 0 && c.r <= 14, "r", "must be in [0, 14]");
    require(c.n_ref >= 2, "n_ref", "must be at least 2");
    require(!c.n_list.empty(), "n_list", "must not be empty");
    for (int v : c.n_list)
        require(v >= 2, "n_list", "every entry must be at least 2");
    require(!c.eps_divisors.empty(), "eps_divisors", "must not be empty");
    for (int v : c.eps_divisors)
        require(v >= 1, "eps_divisors", "every entry must be positive");
    require(c.amplitude >= 0.0, "amplitude", "must be non-negative (bounds m = 1 <= M = 1 + amplitude)");
    require(c.a_minus > 0.0, "a_minus", "must be positive");
    require(c.a_plus > 0.0, "a_plus", "must be positive");
    require(c.coefficient_value > 0.0, "coefficient_value", "must be positive");
    require(c.matrix.size() == 4, "matrix", "needs four entries a11,a12,a21,a22");
    require(c.source_k >= 1, "source_k", "must be positive");
    require(c.tol > 0.0, "tol", "must be positive");
    require(c.maxit >= 1, "maxit", "must be positive");
    require(c.workers >= 1, "workers", "must be positive");

    if (c.coefficient != "constant-matrix")
        return;
    const double a11 = c.matrix[0], a12 = c.matrix[1], a21 = c.matrix[2], a22 = c.matrix[3];
    const double s = 0.5 * (a12 + a21);
    const double lmin = 0.5 * (a11 + a22) - std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + s * s);
    require(lmin > 0.0, "matrix", "symmetric part must be positive definite");
}

/// Resolution check h = 1/(n 2^r) <= eps/4 for commands that use (n, r).
inline void add_resolution_warning(RunConfig& c)
{
    if (c.coefficient != "paper-periodic" && c.coefficient != "layered")
        return;
    const double h = 1.0 / (static_cast<double>(c.n) * std::ldexp(1.0, c.r));
    if (h > c.epsilon / 4.0) {
        std::ostringstream os;
        os << "fine mesh size h = 1/(n 2^r) = " << h << " exceeds eps/4 = " << c.epsilon / 4.0;
        c.warnings.push_back(os.str());
    }
}

/// Best-effort key name from a parser message: an unknown config key, the
/// missing config file, the first `--flag` token, or "command".
inline std::string offending_key(const std::string& message)
{
    const std::string unknown = "not able to parse ";
    if (const auto pos = message.find(unknown); pos != std::string::npos)
        return message.substr(pos + unknown.size());
    if (message.find("not readable") != std::string::npos)
        return "config";
    std::istringstream words(message);
    for (std::string w; words >> w;) {
        if (w.rfind("--", 0) != 0)
            continue;
        w = w.substr(2);
        while (!w.empty() && !(std::isalnum(static_cast<unsigned char>(w.back())) || w.back() == '_'))
            w.pop_back();
        if (!w.empty())
            return w;
    }
    return "command";
}

/// Parses `msfemlab <command> [--config FILE] [--key value]...`. Flags
/// override file values; MSFEMLAB_WORKERS is the fallback for `workers`.
/// Returns nullopt after printing help. Throws UsageError.
inline std::optional<RunConfig> parse_config(int argc, const char* const* argv, std::ostream& out)
{
    RunConfig c;
    std::string command, epsilon = "pi/50";

    CLI::App app{"Multiscale finite elements for oscillatory diffusion: intrusive and non-intrusive MsFEM.\n"
                 "Configuration keys may be given as --key value or as key=value lines in --config FILE.",
                 "msfemlab"};
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "Read key=value lines (# comments) from FILE; flags win");
    app.option_defaults()->always_capture_default();

    app.add_option("command", command, "solve | compare | converge | homog-check | identities")
        ->required()
        ->check(CLI::IsMember({"solve", "compare", "converge", "homog-check", "identities"}));

    const auto problem = "Problem";
    app.add_option("--coefficient", c.coefficient, "paper-periodic | layered | constant-scalar | constant-matrix")
        ->check(CLI::IsMember({"paper-periodic", "layered", "constant-scalar", "constant-matrix"}))
        ->group(problem);
    auto* eps_opt = app.add_option("--epsilon", epsilon, "Oscillation period: number, pi or pi/K")->group(problem);
    app.add_option("--amplitude", c.amplitude, "paper-periodic: a = 1 + amplitude cos^2 sin^2")->group(problem);
    app.add_option("--a_minus", c.a_minus, "layered: value on [k eps, (k + 1/2) eps)")->group(problem);
    app.add_option("--a_plus", c.a_plus, "layered: value on [(k + 1/2) eps, (k + 1) eps)")->group(problem);
    app.add_option("--coefficient_value", c.coefficient_value, "constant-scalar: the constant")->group(problem);
    app.add_option("--matrix", c.matrix, "constant-matrix: a11,a12,a21,a22")->delimiter(',')->expected(4)->group(problem);
    app.add_option("--source", c.source, "paper-source (sin x1 cos x2) | constant | manufactured")
        ->check(CLI::IsMember({"paper-source", "constant", "manufactured"}))
        ->group(problem);
    app.add_option("--source_value", c.source_value, "constant source value")->group(problem);
    app.add_option("--source_k", c.source_k, "manufactured source frequency k")->group(problem);

    const auto disc = "Discretization";
    auto* n_opt = app.add_option("--n", c.n, "Coarse divisions, H = 1/n (homog-check: 4 unless given)")->group(disc);
    auto* r_opt = app.add_option("--r", c.r, "Local refinement level, h = H / 2^r")->group(disc);
    auto* ref_opt = app.add_option("--n_ref", c.n_ref, "Reference grid divisions (compare)")->group(disc);
    auto* list_opt = app.add_option("--n_list", c.n_list, "Coarse divisions of a compare sweep / converge study")
                         ->delimiter(',')
                         ->group(disc);
    app.add_option("--eps_divisors", c.eps_divisors, "homog-check: eps = H / d for each d")
        ->delimiter(',')
        ->group(disc);

    const auto lin = "Linear solver";
    app.add_option("--solver", c.solver, "auto | direct | cg")
        ->check(CLI::IsMember({"auto", "direct", "cg"}))
        ->group(lin);
    app.add_option("--tol", c.tol, "cg relative residual tolerance")->group(lin);
    app.add_option("--maxit", c.maxit, "cg iteration limit")->group(lin);

    const auto runopts = "Run";
    app.add_option("--output_dir", c.output_dir, "Directory for output files")->group(runopts);
    app.add_option("--seed", c.seed, "Seed of randomized checks")->group(runopts);
    app.add_option("--workers", c.workers, "Worker threads for per-element work")
        ->envname("MSFEMLAB_WORKERS")
        ->group(runopts);
    app.add_option("--variant", c.variant, "solve: nonintrusive | pg | galerkin | p1 | reference")
        ->check(CLI::IsMember({"nonintrusive", "pg", "galerkin", "p1", "reference"}))
        ->group(runopts);
    app.add_flag("--full_scale,--full-scale", c.full_scale,
                 "Use eps = pi/150 and n_ref = 1024 unless given explicitly (slow)")
        ->group(runopts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return std::nullopt;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw UsageError(offending_key(e.what()), e.what());
    }

    if (command == "solve")
        c.command = Command::solve;
    else if (command == "compare")
        c.command = Command::compare;
    else if (command == "converge")
        c.command = Command::converge;
    else if (command == "homog-check")
        c.command = Command::homog_check;
    else
        c.command = Command::identities;

    if (c.full_scale) {
        if (eps_opt->count() == 0)
            epsilon = "pi/150";
        if (ref_opt->count() == 0)
            c.n_ref = 1024;
    }
    c.epsilon = parse_epsilon(epsilon);
    c.n_set = n_opt->count() > 0;
    c.r_set = r_opt->count() > 0;
    c.n_list_set = list_opt->count() > 0;
    if (c.command == Command::homog_check && !c.n_set)
        c.n = 4;
    if (c.command == Command::converge && !c.n_list_set)
        c.n_list = {8, 16, 32, 64};

    validate(c);
    if (c.command == Command::solve || c.command == Command::identities)
        add_resolution_warning(c);
    return c;
}

} // namespace msfem::cli
