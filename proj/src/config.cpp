#include "starme/config.hpp"

#include <cmath>
#include <sstream>

#include "starme/dataset.hpp"  // format_number

namespace starme {

std::string TermSpec::label() const {
  switch (kind) {
    case TermKind::Intercept:
      return "intercept";
    case TermKind::Linear:
      return "linear(" + var + ")";
    case TermKind::Pspline:
      return "pspline(" + var + ")";
    case TermKind::Tensor:
      return "tensor(" + var + "," + var2 + ")";
    case TermKind::MePspline:
      return "me_pspline(" + var + ")";
  }
  return "?";
}

std::string RunConfig::me_prefix() const {
  for (const auto* list : {&location, &scale})
    for (const auto& t : *list)
      if (t.kind == TermKind::MePspline) return t.var;
  return "";
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Parser {
  ParseResult out;
  int line_no = 0;

  void error(const std::string& msg) {
    out.errors.push_back("line " + std::to_string(line_no) + ": " + msg);
  }
  void warn(const std::string& msg) {
    out.warnings.push_back("line " + std::to_string(line_no) + ": " + msg);
  }

  bool parse_long(const std::string& key, const std::string& v, long& dst) {
    try {
      size_t used;
      long val = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      dst = val;
      return true;
    } catch (const std::exception&) {
      error("key '" + key + "' expects an integer, got '" + v + "'");
      return false;
    }
  }

  bool parse_int(const std::string& key, const std::string& v, int& dst) {
    long tmp;
    if (!parse_long(key, v, tmp)) return false;
    dst = static_cast<int>(tmp);
    return true;
  }

  bool parse_double(const std::string& key, const std::string& v, double& dst) {
    try {
      size_t used;
      double val = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      dst = val;
      return true;
    } catch (const std::exception&) {
      error("key '" + key + "' expects a number, got '" + v + "'");
      return false;
    }
  }

  bool parse_seed(const std::string& key, const std::string& v,
                  std::uint64_t& dst) {
    try {
      size_t used;
      unsigned long long val = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
      dst = val;
      return true;
    } catch (const std::exception&) {
      error("key '" + key + "' expects a non-negative integer, got '" + v + "'");
      return false;
    }
  }

  // split "a + b + c" at parenthesis depth zero
  std::vector<std::string> split_terms(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    for (char c : s) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == '+' && depth == 0) {
        parts.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(trim(cur));
    return parts;
  }

  bool parse_term(const std::string& text, TermSpec& t) {
    if (text == "intercept") {
      t.kind = TermKind::Intercept;
      return true;
    }
    size_t open = text.find('(');
    if (open == std::string::npos || text.back() != ')') {
      error("term '" + text +
            "' not understood (expected intercept, linear(v), pspline(x, ...), "
            "tensor(x, y, ...) or me_pspline(prefix, ...))");
      return false;
    }
    std::string fn = trim(text.substr(0, open));
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::vector<std::string> args;
    {
      std::string cur;
      for (char c : inner) {
        if (c == ',') {
          args.push_back(trim(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      args.push_back(trim(cur));
    }

    int n_pos = 0;
    if (fn == "linear")
      t.kind = TermKind::Linear, n_pos = 1;
    else if (fn == "pspline")
      t.kind = TermKind::Pspline, n_pos = 1;
    else if (fn == "me_pspline")
      t.kind = TermKind::MePspline, n_pos = 1;
    else if (fn == "tensor")
      t.kind = TermKind::Tensor, n_pos = 2;
    else {
      error("unknown term type '" + fn + "'");
      return false;
    }

    bool ok = true;
    int pos_seen = 0;
    for (const auto& a : args) {
      if (a.empty()) {
        error("empty argument in term '" + text + "'");
        ok = false;
        continue;
      }
      size_t eq = a.find('=');
      if (eq == std::string::npos) {
        if (pos_seen == 0)
          t.var = a;
        else if (pos_seen == 1 && n_pos == 2)
          t.var2 = a;
        else {
          error("term '" + text + "' has too many positional arguments");
          ok = false;
        }
        ++pos_seen;
        continue;
      }
      std::string key = trim(a.substr(0, eq));
      std::string val = trim(a.substr(eq + 1));
      if (t.kind == TermKind::Linear) {
        error("linear terms take no options (got '" + key + "')");
        ok = false;
      } else if (key == "knots") {
        ok &= parse_int("knots", val, t.knots);
      } else if (key == "knots2" && t.kind == TermKind::Tensor) {
        ok &= parse_int("knots2", val, t.knots2);
      } else if (key == "degree") {
        ok &= parse_int("degree", val, t.degree);
      } else if (key == "order") {
        ok &= parse_int("order", val, t.order);
      } else {
        error("unknown option '" + key + "' in term '" + text + "'");
        ok = false;
      }
    }
    if (pos_seen < n_pos) {
      error("term '" + text + "' is missing its covariate name" +
            std::string(n_pos == 2 ? "s" : ""));
      ok = false;
    }
    if (ok && t.kind != TermKind::Intercept && t.kind != TermKind::Linear) {
      if (t.knots < 0 || (t.kind == TermKind::Tensor && t.knots2 < 0)) {
        error("term '" + text + "': knot count must be nonnegative");
        ok = false;
      }
      if (t.degree < 1 || t.degree > 15) {
        error("term '" + text + "': degree must be in [1, 15]");
        ok = false;
      }
      if (t.order < 1) {
        error("term '" + text + "': difference order must be >= 1");
        ok = false;
      }
    }
    return ok;
  }

  std::vector<TermSpec> parse_term_list(const std::string& value) {
    std::vector<TermSpec> terms;
    for (const auto& part : split_terms(value)) {
      if (part.empty()) {
        error("empty term in formula");
        continue;
      }
      TermSpec t;
      if (parse_term(part, t)) terms.push_back(t);
    }
    return terms;
  }
};

const char* kRunKeys = "command, family, input, output_dir, seed";
const char* kChainKeys =
    "iterations, burnin, thinning, mh_scale, latent_thin, proposal_f, bins, "
    "tau2_a, tau2_b";

}  // namespace

ChainSettings resolve_chain_defaults(ChainSettings chain,
                                     const std::string& family) {
  const bool beta = (family == "beta");
  if (chain.iterations < 0) chain.iterations = beta ? 50000 : 10000;
  if (chain.burnin < 0) chain.burnin = beta ? 35000 : 5000;
  if (chain.thinning < 0) chain.thinning = beta ? 15 : 5;
  return chain;
}

ParseResult parse_config(const std::string& text) {
  Parser p;
  RunConfig& c = p.out.config;
  bool me_seen = false, sigma2_seen = false, cu_seen = false;
  bool location_seen = false, scale_seen = false;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  while (std::getline(in, raw)) {
    ++p.line_no;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        p.error("malformed section header '" + line + "'");
        section.clear();
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "chain" && section != "location" &&
          section != "scale" && section != "me") {
        p.error("unknown section [" + section +
                "] (allowed: run, chain, location, scale, me)");
        section.clear();
      }
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      p.error("expected 'key = value', got '" + line + "'");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      p.error("key '" + key + "' appears before any section header");
      continue;
    }
    if (value.empty()) {
      p.error("key '" + key + "' has no value");
      continue;
    }

    if (section == "run") {
      if (key == "command") {
        if (value != "simulate" && value != "downscale" && value != "fit" &&
            value != "evaluate")
          p.error("command '" + value +
                  "' not recognized (allowed: simulate, downscale, fit, "
                  "evaluate)");
        else
          c.command = value;
      } else if (key == "family") {
        if (value != "gaussian" && value != "beta")
          p.error("family '" + value +
                  "' not recognized (allowed: gaussian, beta)");
        else
          c.family = value;
      } else if (key == "input") {
        c.input = value;
      } else if (key == "output_dir") {
        c.output_dir = value;
      } else if (key == "seed") {
        p.parse_seed(key, value, c.seed);
      } else {
        p.error("unknown key '" + key + "' in [run] (allowed: " +
                std::string(kRunKeys) + ")");
      }
    } else if (section == "chain") {
      if (key == "iterations")
        p.parse_long(key, value, c.chain.iterations);
      else if (key == "burnin")
        p.parse_long(key, value, c.chain.burnin);
      else if (key == "thinning")
        p.parse_int(key, value, c.chain.thinning);
      else if (key == "mh_scale")
        p.parse_double(key, value, c.chain.mh_scale);
      else if (key == "latent_thin")
        p.parse_int(key, value, c.chain.latent_thin);
      else if (key == "proposal_f")
        p.parse_double(key, value, c.chain.proposal_f);
      else if (key == "bins")
        p.parse_int(key, value, c.chain.bins);
      else if (key == "tau2_a")
        p.parse_double(key, value, c.chain.tau2_a);
      else if (key == "tau2_b")
        p.parse_double(key, value, c.chain.tau2_b);
      else
        p.error("unknown key '" + key + "' in [chain] (allowed: " +
                std::string(kChainKeys) + ")");
    } else if (section == "location" || section == "scale") {
      if (key == "terms") {
        auto terms = p.parse_term_list(value);
        if (section == "location") {
          c.location = terms;
          location_seen = true;
        } else {
          c.scale = terms;
          scale_seen = true;
        }
      } else {
        p.error("unknown key '" + key + "' in [" + section +
                "] (allowed: terms)");
      }
    } else if (section == "me") {
      me_seen = true;
      if (key == "covariance") {
        if (value != "columns" && value != "global")
          p.error("covariance '" + value +
                  "' not recognized (allowed: columns, global)");
        else
          c.me.covariance = value;
      } else if (key == "sigma2") {
        sigma2_seen = p.parse_double(key, value, c.me.sigma2);
      } else if (key == "c_u") {
        cu_seen = p.parse_double(key, value, c.me.c_u);
      } else {
        p.error("unknown key '" + key +
                "' in [me] (allowed: covariance, sigma2, c_u)");
      }
    }
  }

  p.line_no = 0;  // whole-file diagnostics below

  if (!location_seen) c.location = {TermSpec{}};
  if (!scale_seen) c.scale = {TermSpec{}};

  c.chain = resolve_chain_defaults(c.chain, c.family);

  if (c.chain.iterations < 1)
    p.out.errors.push_back("chain: iterations must be positive");
  if (c.chain.burnin < 0 || c.chain.burnin >= c.chain.iterations)
    p.out.errors.push_back("chain: burnin must lie in [0, iterations)");
  if (c.chain.thinning < 1)
    p.out.errors.push_back("chain: thinning must be >= 1");
  if (c.chain.bins < 2) p.out.errors.push_back("chain: bins must be >= 2");
  if (c.chain.proposal_f < 0)
    p.out.errors.push_back("chain: proposal_f must be >= 0");
  if (c.chain.tau2_a <= 0 || c.chain.tau2_b <= 0)
    p.out.errors.push_back("chain: tau2_a and tau2_b must be positive");
  if (c.chain.latent_thin < 1)
    p.out.errors.push_back("chain: latent_thin must be >= 1");
  if (c.chain.burnin >= 0 && c.chain.burnin < c.chain.iterations &&
      c.chain.thinning >= 1 &&
      (c.chain.iterations - c.chain.burnin) / c.chain.thinning < 100)
    p.out.warnings.push_back(
        "chain: fewer than 100 posterior draws will be stored");

  int n_me = 0;
  for (const auto* list : {&c.location, &c.scale})
    for (const auto& t : *list)
      if (t.kind == TermKind::MePspline) ++n_me;
  if (n_me > 1)
    p.out.errors.push_back(
        "model: at most one me_pspline term is supported per model");

  if (me_seen && n_me == 0)
    p.out.warnings.push_back(
        "[me] section present but no me_pspline term in the model");
  if (c.me.covariance == "global") {
    if (!sigma2_seen || !cu_seen)
      p.out.errors.push_back(
          "me: global covariance pattern needs both sigma2 and c_u");
    else if (c.me.sigma2 <= 0)
      p.out.errors.push_back("me: sigma2 must be positive");
  } else if (sigma2_seen || cu_seen) {
    p.out.errors.push_back(
        "me: sigma2/c_u are only meaningful with covariance = global");
  }

  return p.out;
}

namespace {

std::string serialize_term(const TermSpec& t) {
  switch (t.kind) {
    case TermKind::Intercept:
      return "intercept";
    case TermKind::Linear:
      return "linear(" + t.var + ")";
    case TermKind::Pspline:
      return "pspline(" + t.var + ", knots=" + std::to_string(t.knots) +
             ", degree=" + std::to_string(t.degree) +
             ", order=" + std::to_string(t.order) + ")";
    case TermKind::Tensor:
      return "tensor(" + t.var + ", " + t.var2 +
             ", knots=" + std::to_string(t.knots) +
             ", knots2=" + std::to_string(t.knots2) +
             ", degree=" + std::to_string(t.degree) +
             ", order=" + std::to_string(t.order) + ")";
    case TermKind::MePspline:
      return "me_pspline(" + t.var + ", knots=" + std::to_string(t.knots) +
             ", degree=" + std::to_string(t.degree) +
             ", order=" + std::to_string(t.order) + ")";
  }
  return "";
}

std::string serialize_terms(const std::vector<TermSpec>& terms) {
  std::string out;
  for (size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " + ";
    out += serialize_term(terms[i]);
  }
  return out;
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "command = " << c.command << "\n";
  out << "family = " << c.family << "\n";
  if (!c.input.empty()) out << "input = " << c.input << "\n";
  out << "output_dir = " << c.output_dir << "\n";
  out << "seed = " << c.seed << "\n";
  out << "\n[chain]\n";
  out << "iterations = " << c.chain.iterations << "\n";
  out << "burnin = " << c.chain.burnin << "\n";
  out << "thinning = " << c.chain.thinning << "\n";
  out << "mh_scale = " << format_number(c.chain.mh_scale) << "\n";
  out << "latent_thin = " << c.chain.latent_thin << "\n";
  out << "proposal_f = " << format_number(c.chain.proposal_f) << "\n";
  out << "bins = " << c.chain.bins << "\n";
  out << "tau2_a = " << format_number(c.chain.tau2_a) << "\n";
  out << "tau2_b = " << format_number(c.chain.tau2_b) << "\n";
  out << "\n[location]\n";
  out << "terms = " << serialize_terms(c.location) << "\n";
  out << "\n[scale]\n";
  out << "terms = " << serialize_terms(c.scale) << "\n";
  if (!c.me_prefix().empty()) {
    out << "\n[me]\n";
    out << "covariance = " << c.me.covariance << "\n";
    if (c.me.covariance == "global") {
      out << "sigma2 = " << format_number(c.me.sigma2) << "\n";
      out << "c_u = " << format_number(c.me.c_u) << "\n";
    }
  }
  return out.str();
}

}  // namespace starme
