// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace gcodec {

double psnr(const Tensor& x, const Tensor& x_hat) {
    check_same_shape(x, x_hat, "psnr");
    if (x.size() == 0) throw std::invalid_argument("psnr: empty tensors");
    double mse = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return kPsnrCap;
    const double v = -10.0 * std::log10(mse);
    return v > kPsnrCap ? kPsnrCap : v;
}

double bits_per_pixel(double total_bits, int width, int height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("bits_per_pixel: zero pixels");
    return total_bits / (static_cast<double>(width) * height);
}

uint64_t conv_flops(int c_in, int c_out, int k, int h_out, int w_out) {
    return 2ull * c_in * c_out * static_cast<uint64_t>(k) * k * h_out * w_out;
}

double FlopLedger::reduction() const {
    if (effective_total <= 0.0) throw InvalidStateError("FlopLedger: zero effective FLOPs");
    return static_cast<double>(baseline_total) / effective_total;
}

std::string FlopLedger::table() const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-8s %-7s %14s %16s %10s\n", "layer", "gated",
                  "baseline", "effective", "active");
    os << buf;
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof(buf), "%-8s %-7s %14llu %16.1f %10.4f\n", e.layer.c_str(),
                      e.gated ? "yes" : "no",
                      static_cast<unsigned long long>(e.baseline_flops), e.effective_flops,
                      e.input_channels_active);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "total baseline %llu  effective %.1f  reduction %.3fx  "
                  "flop-weighted sparsity %.4f\n",
                  static_cast<unsigned long long>(baseline_total), effective_total,
                  reduction(), flop_weighted_sparsity);
    os << buf;
    return os.str();
}

FlopLedger effective_flops(const std::vector<LayerGeom>& layers,
                           const std::vector<Tensor>& gate_masks) {
    FlopLedger ledger;
    double gated_flops = 0.0, gated_sparsity_weighted = 0.0;
    for (const auto& l : layers) {
        FlopLedgerEntry e;
        e.layer = l.name;
        e.grid_h = l.grid_h;
        e.grid_w = l.grid_w;
        e.baseline_flops = conv_flops(l.c_in, l.c_out, l.k, l.grid_h, l.grid_w);
        e.gated = l.gate_index >= 0;
        if (e.gated) {
            if (static_cast<size_t>(l.gate_index) >= gate_masks.size())
                throw std::invalid_argument("effective_flops: missing mask for gated layer");
            const Tensor& m = gate_masks[l.gate_index];
            double active = 0.0;
            for (size_t i = 0; i < m.size(); ++i) {
                if (m[i] != 0.0 && m[i] != 1.0)
                    throw InvalidStateError("effective_flops: non-binary mask");
                active += m[i];
            }
            e.input_channels_active = active / static_cast<double>(m.size());
            e.effective_flops = static_cast<double>(e.baseline_flops) * e.input_channels_active;
            gated_flops += static_cast<double>(e.baseline_flops);
            gated_sparsity_weighted +=
                static_cast<double>(e.baseline_flops) * (1.0 - e.input_channels_active);
        } else {
            e.input_channels_active = 1.0;
            e.effective_flops = static_cast<double>(e.baseline_flops);
        }
        ledger.baseline_total += e.baseline_flops;
        ledger.effective_total += e.effective_flops;
        ledger.entries.push_back(std::move(e));
    }
    ledger.flop_weighted_sparsity =
        gated_flops > 0.0 ? gated_sparsity_weighted / gated_flops : 0.0;
    return ledger;
}

double flop_reduction(double baseline, double effective) {
    if (effective <= 0.0) throw InvalidStateError("flop_reduction: zero effective FLOPs");
    return baseline / effective;
}

StorageReport storage_report(std::vector<CodecState*> states) {
    if (states.empty()) throw std::invalid_argument("storage_report: empty model list");
    StorageReport r;
    std::vector<unsigned char> buf;
    for (auto* s : states) {
        serialize_params(*s, buf);
        r.per_model_bytes.push_back(buf.size());
    }
    r.variable_rate_bytes = r.per_model_bytes.front();
    for (size_t i = 1; i < r.per_model_bytes.size(); ++i)
        r.fixed_total_bytes += r.per_model_bytes[i];
    if (r.per_model_bytes.size() == 1) {
        r.saving = 0.0;  // nothing to compare against
    } else {
        r.saving = 1.0 - static_cast<double>(r.variable_rate_bytes) /
                             static_cast<double>(r.fixed_total_bytes);
    }
    return r;
}

double RDReport::mean_bpp() const {
    double s = 0.0;
    for (const auto& r : records) s += r.bpp;
    return records.empty() ? 0.0 : s / static_cast<double>(records.size());
}

double RDReport::mean_psnr() const {
    double s = 0.0;
    for (const auto& r : records) s += r.psnr_db;
    return records.empty() ? 0.0 : s / static_cast<double>(records.size());
}

std::string rd_records_to_csv(const std::vector<RDRecord>& records) {
    std::ostringstream os;
    os << "image,lambda,bpp,psnr_db,sparsity\n";
    char buf[256];
    for (const auto& r : records) {
        if (r.image.find(',') != std::string::npos)
            throw std::invalid_argument("rd_records_to_csv: image names may not contain commas");
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n", r.image.c_str(),
                      r.lambda, r.bpp, r.psnr_db, r.sparsity);
        os << buf;
    }
    return os.str();
}

std::vector<RDRecord> rd_records_from_csv(const std::string& csv) {
    std::vector<RDRecord> out;
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line) || line != "image,lambda,bpp,psnr_db,sparsity")
        throw std::invalid_argument("rd_records_from_csv: bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        RDRecord r;
        size_t pos = line.find(',');
        if (pos == std::string::npos)
            throw std::invalid_argument("rd_records_from_csv: bad row");
        r.image = line.substr(0, pos);
        const char* p = line.c_str() + pos + 1;
        char* end = nullptr;
        r.lambda = std::strtod(p, &end);
        if (*end != ',') throw std::invalid_argument("rd_records_from_csv: bad row");
        p = end + 1;
        r.bpp = std::strtod(p, &end);
        if (*end != ',') throw std::invalid_argument("rd_records_from_csv: bad row");
        p = end + 1;
        r.psnr_db = std::strtod(p, &end);
        if (*end != ',') throw std::invalid_argument("rd_records_from_csv: bad row");
        p = end + 1;
        r.sparsity = std::strtod(p, &end);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace gcodec
