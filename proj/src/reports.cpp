#include "diffprobe/reports.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"

namespace diffprobe {

GridReports grid_reports(const std::vector<ProbeGrid>& grids,
                         const std::map<std::string, double>& model_sizes,
                         const std::vector<ModelPair>& pairs, std::size_t top_k) {
    if (grids.empty()) throw Error("grid reports need at least one grid");

    // dataset -> model -> best
    std::map<std::string, std::map<std::string, BestCell>> bests;
    std::set<std::string> models;
    for (const auto& grid : grids) {
        models.insert(grid.model_id);
        if (!grid.best) continue;
        if (!bests[grid.dataset_name].emplace(grid.model_id, *grid.best).second)
            throw Error("duplicate grid for model '" + grid.model_id + "' on dataset '" +
                        grid.dataset_name + "'");
    }

    GridReports reports;
    for (const auto& [dataset, by_model] : bests) {
        std::vector<std::pair<std::string, BestCell>> ranked(by_model.begin(), by_model.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.second.mean_score > b.second.mean_score;
        });
        for (std::size_t r = 0; r < ranked.size() && r < top_k; ++r) {
            const auto& [model, best] = ranked[r];
            reports.top.push_back(
                {dataset, r + 1, model, best.mean_score, best.cell.layer, best.cell.position});
        }

        std::map<int, std::size_t, std::greater<>> counts;
        for (const auto& [model, best] : by_model) ++counts[best.cell.position];
        auto& histogram = reports.position_histogram[dataset];
        for (const auto& [position, count] : counts)
            histogram.push_back({position, count,
                                 100.0 * static_cast<double>(count) / static_cast<double>(by_model.size())});

        for (const auto& [model, best] : by_model) {
            const auto size = model_sizes.find(model);
            if (size != model_sizes.end())
                reports.scaling_points[dataset].push_back({model, size->second, best.mean_score});
        }
    }

    for (const auto& pair : pairs) {
        for (const auto* model : {&pair.base, &pair.specialised})
            if (!models.contains(*model))
                throw Error("unknown model in pair: '" + *model + "'");
        bool any = false;
        for (const auto& [dataset, by_model] : bests) {
            const auto base = by_model.find(pair.base);
            const auto spec = by_model.find(pair.specialised);
            if (base == by_model.end() || spec == by_model.end()) continue;
            any = true;
            reports.deltas.push_back({dataset, pair.base, pair.specialised, base->second.mean_score,
                                      spec->second.mean_score,
                                      spec->second.mean_score - base->second.mean_score});
        }
        if (!any)
            throw Error("pair ('" + pair.base + "', '" + pair.specialised + "') shares no scored dataset");
    }
    return reports;
}

std::string format_top_row(const TopRow& row) {
    return format_fixed(row.score, 4) + ", layer " + std::to_string(row.layer) + ", pos " +
           typographic_minus(std::to_string(row.position));
}

std::string format_delta(const PairDelta& delta) {
    std::string value = format_fixed(delta.delta, 2);
    if (value.front() != '-') value.insert(value.begin(), '+');
    return delta.specialised + ": " + typographic_minus(value);
}

void write_top_csv(const GridReports& reports, std::ostream& out) {
    out << "dataset,rank,model_id,score,layer,position\n";
    for (const auto& row : reports.top)
        out << row.dataset << ',' << row.rank << ',' << row.model_id << ',' << format_double(row.score)
            << ',' << row.layer << ',' << row.position << '\n';
}

void write_histogram_csv(const GridReports& reports, std::ostream& out) {
    out << "dataset,position,count,percent\n";
    for (const auto& [dataset, shares] : reports.position_histogram)
        for (const auto& share : shares)
            out << dataset << ',' << share.position << ',' << share.count << ','
                << format_double(share.percent) << '\n';
}

void write_deltas_csv(const GridReports& reports, std::ostream& out) {
    out << "dataset,base,specialised,base_score,specialised_score,delta\n";
    for (const auto& d : reports.deltas)
        out << d.dataset << ',' << d.base << ',' << d.specialised << ',' << format_double(d.base_score)
            << ',' << format_double(d.specialised_score) << ',' << format_double(d.delta) << '\n';
}

std::string reports_json(const GridReports& reports) {
    using nlohmann::ordered_json;
    ordered_json top = ordered_json::array();
    for (const auto& row : reports.top)
        top.push_back({{"dataset", row.dataset},
                       {"rank", row.rank},
                       {"model_id", row.model_id},
                       {"score", row.score},
                       {"layer", row.layer},
                       {"position", row.position},
                       {"summary", format_top_row(row)}});
    ordered_json histogram = ordered_json::object();
    for (const auto& [dataset, shares] : reports.position_histogram) {
        ordered_json rows = ordered_json::array();
        for (const auto& s : shares)
            rows.push_back({{"position", s.position}, {"count", s.count}, {"percent", s.percent}});
        histogram[dataset] = rows;
    }
    ordered_json deltas = ordered_json::array();
    for (const auto& d : reports.deltas)
        deltas.push_back({{"dataset", d.dataset},
                          {"base", d.base},
                          {"specialised", d.specialised},
                          {"base_score", d.base_score},
                          {"specialised_score", d.specialised_score},
                          {"delta", d.delta},
                          {"summary", format_delta(d)}});
    const ordered_json j{{"top", top}, {"position_histogram", histogram}, {"deltas", deltas}};
    return j.dump(2) + "\n";
}

}  // namespace diffprobe
