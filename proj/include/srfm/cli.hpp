#pragma once

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "srfm/config.hpp"
#include "srfm/grad_check.hpp"
#include "srfm/trainer.hpp"

namespace srfm {

namespace cli_detail {

inline const char* kUsage =
    "usage: srfm <command> --config <path> [--set key=value ...]\n"
    "commands:\n"
    "  gen-data    write the synthetic multi-domain corpus to data_dir\n"
    "  pretrain    joint multi-domain training; writes checkpoint_path\n"
    "  finetune    cold-start finetune of checkpoint_path; writes output_path\n"
    "  evaluate    score checkpoint_path on the test splits\n"
    "  export-emb  write adapted vectors for the test splits to output_path\n"
    "  gradcheck   finite-difference check of the full loss gradient\n"
    "flags:\n"
    "  --config <path>   JSON run configuration (required)\n"
    "  --set key=value   dotted-path override, e.g. --set model.K=4\n";

struct CliError : std::runtime_error {  // usage / config problems: exit 2
    using std::runtime_error::runtime_error;
};

// Apply one dotted-path override onto the config document. Values parse as
// JSON when possible (numbers, booleans, arrays) and fall back to strings.
inline void apply_override(json& doc, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw CliError("--set expects key=value, got: " + kv);
    std::string path = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json* cursor = &doc;
    std::istringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw CliError("bad override path: " + path);
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) cursor = &(*cursor)[parts[i]];
    (*cursor)[parts.back()] = value;
}

struct ParsedArgs {
    std::string command;
    std::string config_path;
    std::vector<std::string> overrides;
};

inline ParsedArgs parse_args(const std::vector<std::string>& args) {
    if (args.empty()) throw CliError("missing command");
    ParsedArgs p;
    p.command = args[0];
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (++i >= args.size()) throw CliError("--config needs a path");
            p.config_path = args[i];
        } else if (args[i] == "--set") {
            if (++i >= args.size()) throw CliError("--set needs key=value");
            p.overrides.push_back(args[i]);
        } else {
            throw CliError("unknown argument: " + args[i]);
        }
    }
    if (p.config_path.empty()) throw CliError("--config is required");
    return p;
}

inline RunConfig resolve_config(const ParsedArgs& args, std::ostream& log) {
    std::ifstream in(args.config_path);
    if (!in) throw CliError("cannot open config file: " + args.config_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw CliError("config parse error in " + args.config_path + ": " + e.what());
    }
    for (const std::string& kv : args.overrides) apply_override(doc, kv);
    RunConfig rc;
    try {
        rc = run_config_from_json(doc);
    } catch (const ConfigError& e) {
        throw CliError(e.what());
    }
    // full resolved config to the log so any run is reproducible from it
    log << "resolved config: " << to_json(rc).dump() << "\n";
    return rc;
}

inline std::vector<int> base_domains(int K) {
    std::vector<int> out;
    for (int k = 1; k <= K; ++k) out.push_back(k);
    return out;
}

inline std::string metrics_path(const std::string& anchor) { return anchor + ".metrics.jsonl"; }

inline int run_gen_data(const RunConfig& rc, std::ostream& log) {
    SynthDataset ds = generate_dataset(rc.synth);
    write_dataset(ds, rc.data_dir);
    log << "wrote " << ds.by_domain.size() << " domains to " << rc.data_dir << "\n";
    return 0;
}

inline int run_pretrain(const RunConfig& rc, std::ostream& log) {
    SplitData data = load_splits(rc.data_dir, base_domains(rc.model.K));
    TrainOutcome out = pretrain(rc.model, rc.optimizer, rc.train, data.train, data.eval);
    out.best.seed = rc.train.seed;
    save_checkpoint(out.best, rc.checkpoint_path);
    write_metrics(out.metrics, metrics_path(rc.checkpoint_path));
    log << "checkpoint: " << rc.checkpoint_path << "\n";
    if (out.aborted) {
        log << "training aborted on non-finite loss; last good checkpoint kept\n";
        return 1;
    }
    return 0;
}

inline int run_finetune(const RunConfig& rc, std::ostream& log) {
    if (rc.output_path.empty()) throw CliError("finetune requires output_path");
    Checkpoint pre = load_checkpoint(rc.checkpoint_path);
    int cold = pre.store.value("emb.domain").shape[0] + 1;
    SplitData data = load_splits(rc.data_dir, {cold});
    TrainOutcome out = finetune(pre, freeze_split_from_string(rc.finetune_split), rc.optimizer,
                                rc.train, data.train, data.eval);
    out.best.seed = rc.train.seed;
    save_checkpoint(out.best, rc.output_path);
    write_metrics(out.metrics, metrics_path(rc.output_path));
    log << "finetuned checkpoint: " << rc.output_path << "\n";
    if (out.aborted) {
        log << "training aborted on non-finite loss; last good checkpoint kept\n";
        return 1;
    }
    return 0;
}

inline std::vector<MetricRow> report_rows(const EvalReport& rep) {
    std::vector<MetricRow> rows;
    for (const auto& [k, metrics] : rep.domain_metrics)
        for (const auto& [name, value] : metrics)
            rows.push_back({k, name.substr(0, name.find('_')), "auc", value, 0});
    rows.push_back({0, "ctr", "loss", rep.l_ctr, 0});
    rows.push_back({0, "sim", "loss", rep.l_sim, 0});
    if (rep.alignment) rows.push_back({0, "align", "mean_js", *rep.alignment, 0});
    if (rep.mean_ctr_auc) rows.push_back({0, "ctr", "mean_auc", *rep.mean_ctr_auc, 0});
    return rows;
}

inline int run_evaluate(const RunConfig& rc, std::ostream& log, std::ostream& out_stream) {
    Checkpoint ck = load_checkpoint(rc.checkpoint_path);
    SplitData data = load_splits(rc.data_dir, base_domains(domain_count(ck.store)));
    EvalReport rep = evaluate(ck.store, ck.cfg, data.test);
    std::vector<MetricRow> rows = report_rows(rep);
    if (rc.output_path.empty()) {
        for (const MetricRow& r : rows) out_stream << to_json(r).dump() << "\n";
    } else {
        write_metrics(rows, rc.output_path);
        log << "metrics: " << rc.output_path << "\n";
    }
    return 0;
}

inline int run_export_emb(const RunConfig& rc, std::ostream& log) {
    if (rc.output_path.empty()) throw CliError("export-emb requires output_path");
    Checkpoint ck = load_checkpoint(rc.checkpoint_path);
    SplitData data = load_splits(rc.data_dir, base_domains(domain_count(ck.store)));
    std::vector<InteractionRecord> pool;
    for (const auto& [k, recs] : data.test) pool.insert(pool.end(), recs.begin(), recs.end());
    export_embeddings(ck.store, ck.cfg, pool, rc.output_path);
    log << "embeddings: " << rc.output_path << " (" << pool.size() << " rows)\n";
    return 0;
}

// A deterministic labeled micro-batch covering min(K,3) domains, built
// in-process so the check needs no data files.
inline int run_gradcheck(const RunConfig& rc, std::ostream& log, std::ostream& out_stream) {
    ModelConfig cfg = rc.model;
    if (cfg.divergence == DivergenceKind::kMmd && cfg.mmd_sigma <= 0.0)
        cfg.mmd_sigma = 1.0;  // the bandwidth is gradient-stopped; pin it here
    std::vector<InteractionRecord> data;
    for (int k = 1; k <= std::min(cfg.K, 3); ++k) {
        InteractionRecord s;
        s.domain_id = k;
        s.domain_kind = DomainKind::kSearch;
        s.user_id = k;
        s.query_text = "sample query " + std::to_string(k);
        s.item_id = 10 + k;
        s.item_title = "sample item title " + std::to_string(k);
        s.item_sparse_ids = {k};
        s.y_ctr = k % 2;
        s.y_sim = 1 - k % 2;
        data.push_back(s);
        InteractionRecord r;
        r.domain_id = k;
        r.domain_kind = DomainKind::kRec;
        r.user_id = 100 + k;
        r.item_id = 20 + k;
        r.item_title = "another item " + std::to_string(k);
        r.item_sparse_ids = {k + 1};
        r.y_ctr = 1 - k % 2;
        data.push_back(r);
    }
    std::vector<int> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    DomainBatch batch = DomainBatch::from_indices(data, idx);
    ParameterStore store = init_params(cfg, rc.train.seed);
    auto build = [&](Graph& g, const ParameterStore& s) {
        ModelGraph m(g, s, cfg);
        return m.total_loss(data, batch).total;
    };
    double err = grad_check(build, store, 1e-5);
    out_stream << "max_rel_error " << err << "\n";
    log << (err < 1e-4 ? "gradcheck passed\n" : "gradcheck FAILED\n");
    return err < 1e-4 ? 0 : 1;
}

}  // namespace cli_detail

// Full command dispatch; returns the process exit code. Logs go to `log`
// (standard error in production), machine-readable output to `out_stream`.
inline int dispatch(const std::vector<std::string>& args, std::ostream& log = std::cerr,
                    std::ostream& out_stream = std::cout) {
    using namespace cli_detail;
    try {
        ParsedArgs parsed = parse_args(args);
        const std::string& cmd = parsed.command;
        if (cmd != "gen-data" && cmd != "pretrain" && cmd != "finetune" && cmd != "evaluate" &&
            cmd != "export-emb" && cmd != "gradcheck")
            throw CliError("unknown command: " + cmd);
        RunConfig rc = resolve_config(parsed, log);
        if (cmd == "gen-data") return run_gen_data(rc, log);
        if (cmd == "pretrain") return run_pretrain(rc, log);
        if (cmd == "finetune") return run_finetune(rc, log);
        if (cmd == "evaluate") return run_evaluate(rc, log, out_stream);
        if (cmd == "export-emb") return run_export_emb(rc, log);
        return run_gradcheck(rc, log, out_stream);
    } catch (const cli_detail::CliError& e) {
        log << "error: " << e.what() << "\n" << cli_detail::kUsage;
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace srfm
