#include "dicycle/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dicycle/time_encoding.hpp"

namespace dicycle {

std::int64_t EventLog::user_index(const std::string& name) const {
  for (std::size_t i = 0; i < user_names.size(); ++i) {
    if (user_names[i] == name) return static_cast<std::int64_t>(i);
  }
  return -1;
}

std::int64_t EventLog::item_index(const std::string& name) const {
  for (std::size_t i = 0; i < item_names.size(); ++i) {
    if (item_names[i] == name) return static_cast<std::int64_t>(i);
  }
  return -1;
}

namespace {

bool parse_int64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

}  // namespace

EventLog ingest(const std::string& path, char delimiter) {
  std::ifstream is(path);
  if (!is) throw DataError("ingest: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("ingest: " + path + " is empty, expected a header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split(line, delimiter);
  int col_user = -1, col_item = -1, col_time = -1, col_label = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = trim(header[i]);
    if (name == "user_id") col_user = static_cast<int>(i);
    else if (name == "item_id") col_item = static_cast<int>(i);
    else if (name == "timestamp") col_time = static_cast<int>(i);
    else if (name == "label") col_label = static_cast<int>(i);
    else throw SchemaError("ingest: " + path + ": unexpected column '" + name + "'");
  }
  if (col_user < 0 || col_item < 0 || col_time < 0) {
    throw SchemaError("ingest: " + path + ": header must name user_id, item_id and timestamp");
  }
  const std::size_t ncols = header.size();

  EventLog log;
  std::unordered_map<std::string, std::int64_t> users;
  std::unordered_map<std::string, std::int64_t> items;
  auto intern = [](std::unordered_map<std::string, std::int64_t>& map,
                   std::vector<std::string>& names, const std::string& key) {
    auto [it, inserted] = map.emplace(key, static_cast<std::int64_t>(names.size()));
    if (inserted) names.push_back(key);
    return it->second;
  };

  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line, delimiter);
    if (fields.size() != ncols) {
      ++log.rejected_rows;
      continue;
    }
    const std::string user = trim(fields[static_cast<std::size_t>(col_user)]);
    const std::string item = trim(fields[static_cast<std::size_t>(col_item)]);
    std::int64_t ts = 0;
    if (user.empty() || item.empty() ||
        !parse_int64(trim(fields[static_cast<std::size_t>(col_time)]), ts) || ts < 0) {
      ++log.rejected_rows;
      continue;
    }
    int label = 1;
    if (col_label >= 0) {
      std::int64_t lv = 0;
      if (!parse_int64(trim(fields[static_cast<std::size_t>(col_label)]), lv) ||
          (lv != 0 && lv != 1)) {
        ++log.rejected_rows;
        continue;
      }
      label = static_cast<int>(lv);
    }
    EventRow row;
    row.user = intern(users, log.user_names, user);
    row.item = intern(items, log.item_names, item);
    row.time = ts;
    row.label = label;
    log.rows.push_back(row);
  }
  return log;
}

void write_event_log(const std::string& path, const EventLog& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("write_event_log: cannot open " + path);
  os << "user_id,item_id,timestamp,label\n";
  for (const auto& r : log.rows) {
    os << log.user_names[static_cast<std::size_t>(r.user)] << ','
       << log.item_names[static_cast<std::size_t>(r.item)] << ',' << r.time << ',' << r.label
       << '\n';
  }
  if (!os) throw DataError("write_event_log: write to " + path + " failed");
}

std::size_t Sample::real_count() const {
  std::size_t n = 0;
  for (bool p : behavior_pad) n += p ? 0 : 1;
  return n;
}

void validate_sample(const Sample& s) {
  if (s.behavior_items.size() != s.behavior_times.size() ||
      s.behavior_items.size() != s.behavior_pad.size()) {
    throw DataError("sample: behavior arrays disagree in length");
  }
  if (s.label != 0 && s.label != 1) {
    throw DataError("sample: label must be 0 or 1, got " + std::to_string(s.label));
  }
  bool seen_real = false;
  std::int64_t prev = -1;
  for (std::size_t i = 0; i < s.behavior_items.size(); ++i) {
    if (s.behavior_pad[i]) {
      if (seen_real) throw DataError("sample: padding must be a prefix (left-padding)");
      if (s.behavior_items[i] != kPadItem) {
        throw DataError("sample: padded position carries item " +
                        std::to_string(s.behavior_items[i]) + " instead of the reserved id");
      }
      continue;
    }
    seen_real = true;
    if (s.behavior_items[i] < 0) throw DataError("sample: negative item id at position " + std::to_string(i));
    if (s.behavior_times[i] < prev) throw DataError("sample: behavior times must be non-decreasing");
    if (s.behavior_times[i] > s.target_time) {
      throw DataError("sample: behavior time exceeds target time");
    }
    prev = s.behavior_times[i];
  }
}

SampleBuild build_samples(const EventLog& log, std::size_t max_behaviors, int negative_ratio,
                          std::uint64_t seed) {
  if (negative_ratio < 0) throw ConfigError("build_samples: negative_ratio must be >= 0");
  const std::int64_t num_items = static_cast<std::int64_t>(log.item_names.size());
  const std::size_t num_users = log.user_names.size();

  std::vector<std::vector<EventRow>> per_user(num_users);
  for (const auto& r : log.rows) {
    if (r.label == 1) per_user[static_cast<std::size_t>(r.user)].push_back(r);
  }

  SampleBuild out;
  for (std::size_t u = 0; u < num_users; ++u) {
    auto& events = per_user[u];
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRow& a, const EventRow& b) { return a.time < b.time; });
    if (events.size() < 2) {
      ++out.excluded_users;
      continue;
    }
    std::unordered_set<std::int64_t> interacted;
    for (const auto& e : events) interacted.insert(e.item);
    const bool universe_exhausted = static_cast<std::int64_t>(interacted.size()) >= num_items;

    Rng rng(mix_seed(seed, u, 0x6e656773));
    for (std::size_t k = 0; k < events.size(); ++k) {
      const std::size_t lo = k > max_behaviors ? k - max_behaviors : 0;
      Sample pos;
      pos.user = static_cast<std::int64_t>(u);
      for (std::size_t i = lo; i < k; ++i) {
        pos.behavior_items.push_back(events[i].item);
        pos.behavior_times.push_back(events[i].time);
        pos.behavior_pad.push_back(false);
      }
      pos.target_item = events[k].item;
      pos.target_time = events[k].time;
      pos.label = 1;

      std::vector<Sample> group;
      group.push_back(pos);
      for (int nrep = 0; nrep < negative_ratio; ++nrep) {
        if (universe_exhausted) {
          ++out.skipped_negatives;
          continue;
        }
        std::int64_t neg_item = -1;
        do {
          neg_item = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(num_items)));
        } while (interacted.count(neg_item) > 0);
        Sample neg = pos;
        neg.target_item = neg_item;
        neg.label = 0;
        group.push_back(std::move(neg));
      }
      auto& dst = (k + 1 == events.size()) ? out.test : out.train;
      for (auto& s : group) dst.push_back(std::move(s));
    }
  }
  return out;
}

// ---- synthetic planted-cycle generator --------------------------------

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec spec;
  CategoryProfile meal{"meal", 0.2, {{11, 4.0}, {18, 4.0}, {21, 3.0}}, 0.0, 0.0, 0.8, 2.0};
  CategoryProfile commute{"commute", 0.2, {{8, 5.0}, {17, 5.0}}, 0.0, 0.0, 0.8, 2.0};
  CategoryProfile taxi{"taxi", 0.2, {}, 24.0, 5.0, 0.8, 2.0};
  CategoryProfile fitness{"fitness", 0.2, {}, 48.0, 5.0, 0.8, 2.0};
  CategoryProfile browse{"browse", 0.2, {}, 0.0, 0.0, 0.8, 2.0};
  spec.categories = {meal, commute, taxi, fitness, browse};
  return spec;
}

void SyntheticSpec::validate() const {
  if (num_users < 1 || num_items < 1) throw ConfigError("synthetic spec: need users and items");
  if (horizon_days <= 0.0) throw ConfigError("synthetic spec: horizon must be positive");
  if (base_rate_per_day <= 0.0) throw ConfigError("synthetic spec: base rate must be positive");
  if (start_epoch < 0) throw ConfigError("synthetic spec: start epoch must be non-negative");
  if (categories.empty()) throw ConfigError("synthetic spec: need at least one category");
  double frac_sum = 0.0;
  for (const auto& c : categories) {
    if (c.name.empty()) throw ConfigError("synthetic spec: category without a name");
    if (c.item_fraction <= 0.0 || c.item_fraction > 1.0) {
      throw ConfigError("synthetic spec: category '" + c.name + "' has item fraction " +
                        std::to_string(c.item_fraction));
    }
    frac_sum += c.item_fraction;
    for (const auto& [hour, amp] : c.atc_peaks) {
      if (hour < 0 || hour > 23) throw ConfigError("synthetic spec: peak hour out of range");
      if (amp < 0.0) throw ConfigError("synthetic spec: peak amplitude must be >= 0");
    }
    if (c.rtc_period_hours < 0.0 || c.rtc_amplitude < 0.0) {
      throw ConfigError("synthetic spec: RTC period and amplitude must be >= 0");
    }
    if (c.has_rtc() && (c.rtc_decay <= 0.0 || c.rtc_decay > 1.0)) {
      throw ConfigError("synthetic spec: RTC decay must be in (0, 1]");
    }
    if (c.has_rtc() && c.rtc_width_hours <= 0.0) {
      throw ConfigError("synthetic spec: RTC width must be positive");
    }
  }
  if (std::abs(frac_sum - 1.0) > 1e-6) {
    throw ConfigError("synthetic spec: item fractions sum to " + std::to_string(frac_sum) +
                      ", expected 1");
  }
  // every category must own at least one item under the allocation rule
  double cum = 0.0;
  std::int64_t prev = 0;
  for (const auto& c : categories) {
    cum += c.item_fraction;
    const auto end = static_cast<std::int64_t>(std::llround(cum * static_cast<double>(num_items)));
    if (end <= prev) throw ConfigError("synthetic spec: category '" + c.name + "' gets no items");
    prev = end;
  }
}

namespace {

std::string category_to_string(const CategoryProfile& c) {
  std::ostringstream os;
  os << c.name << " frac=" << c.item_fraction;
  if (!c.atc_peaks.empty()) {
    os << " peaks=";
    for (std::size_t i = 0; i < c.atc_peaks.size(); ++i) {
      if (i) os << ',';
      os << c.atc_peaks[i].first << ':' << c.atc_peaks[i].second;
    }
  }
  if (c.has_rtc()) {
    os << " period_h=" << c.rtc_period_hours << " amp=" << c.rtc_amplitude
       << " decay=" << c.rtc_decay << " width_h=" << c.rtc_width_hours;
  }
  return os.str();
}

CategoryProfile category_from_string(const std::string& text) {
  std::istringstream is(text);
  std::string token;
  CategoryProfile c;
  if (!(is >> c.name)) throw ConfigError("category line without a name: '" + text + "'");
  while (is >> token) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("category '" + c.name + "': expected key=value, got '" + token + "'");
    }
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "frac") {
      c.item_fraction = std::strtod(value.c_str(), nullptr);
    } else if (key == "peaks") {
      for (const std::string& p : split(value, ',')) {
        const auto parts = split(p, ':');
        if (parts.size() != 2) throw ConfigError("category '" + c.name + "': bad peak '" + p + "'");
        c.atc_peaks.emplace_back(std::atoi(parts[0].c_str()), std::strtod(parts[1].c_str(), nullptr));
      }
    } else if (key == "period_h") {
      c.rtc_period_hours = std::strtod(value.c_str(), nullptr);
    } else if (key == "amp") {
      c.rtc_amplitude = std::strtod(value.c_str(), nullptr);
    } else if (key == "decay") {
      c.rtc_decay = std::strtod(value.c_str(), nullptr);
    } else if (key == "width_h") {
      c.rtc_width_hours = std::strtod(value.c_str(), nullptr);
    } else if (key == "items") {
      // sidecar annotation, not part of the spec proper
    } else {
      throw ConfigError("category '" + c.name + "': unknown key '" + key + "'");
    }
  }
  return c;
}

}  // namespace

SyntheticSpec SyntheticSpec::from_kv(const KeyValueFile& kv) {
  kv.require_known_keys({"num_users", "num_items", "horizon_days", "base_rate_per_day",
                         "start_epoch", "seed", "category"});
  SyntheticSpec spec = defaults();
  spec.categories.clear();
  spec.num_users = kv.get_int_or("num_users", spec.num_users);
  spec.num_items = kv.get_int_or("num_items", spec.num_items);
  spec.horizon_days = kv.get_double_or("horizon_days", spec.horizon_days);
  spec.base_rate_per_day = kv.get_double_or("base_rate_per_day", spec.base_rate_per_day);
  spec.start_epoch = kv.get_int_or("start_epoch", spec.start_epoch);
  spec.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", static_cast<long long>(spec.seed)));
  for (const std::string& line : kv.get_all("category")) {
    spec.categories.push_back(category_from_string(line));
  }
  if (spec.categories.empty()) spec.categories = defaults().categories;
  spec.validate();
  return spec;
}

KeyValueFile SyntheticSpec::to_kv() const {
  KeyValueFile kv;
  kv.set("num_users", std::to_string(num_users));
  kv.set("num_items", std::to_string(num_items));
  std::ostringstream h;
  h << horizon_days;
  kv.set("horizon_days", h.str());
  std::ostringstream b;
  b << base_rate_per_day;
  kv.set("base_rate_per_day", b.str());
  kv.set("start_epoch", std::to_string(start_epoch));
  kv.set("seed", std::to_string(seed));
  for (const auto& c : categories) kv.append("category", category_to_string(c));
  return kv;
}

double SyntheticTruth::intensity_per_hour(std::size_t category, std::int64_t epoch_seconds,
                                          double hours_since_last) const {
  const auto& c = categories.at(category).profile;
  const double base_h = base_rate_per_day / 24.0;
  const Index hour = slot_of(GranularityKind::HourOfDay, epoch_seconds);
  double atc = 0.0;
  for (const auto& [peak, amp] : c.atc_peaks) {
    if (peak == hour) atc += amp;
  }
  double rtc = 0.0;
  if (c.has_rtc() && hours_since_last >= 0.0) {
    const double m = std::round(hours_since_last / c.rtc_period_hours);
    if (m >= 1.0 &&
        std::abs(hours_since_last - m * c.rtc_period_hours) <= c.rtc_width_hours / 2.0) {
      rtc = c.rtc_amplitude * std::pow(c.rtc_decay, m - 1.0);
    }
  }
  return base_h * (1.0 + atc) * (1.0 + rtc);
}

KeyValueFile SyntheticTruth::to_kv() const {
  KeyValueFile kv;
  std::ostringstream b;
  b << base_rate_per_day;
  kv.set("base_rate_per_day", b.str());
  std::ostringstream h;
  h << horizon_days;
  kv.set("horizon_days", h.str());
  kv.set("start_epoch", std::to_string(start_epoch));
  for (const auto& c : categories) {
    kv.append("category", category_to_string(c.profile) + " items=" +
                              std::to_string(c.item_begin) + ".." + std::to_string(c.item_end));
  }
  return kv;
}

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticResult res;
  res.truth.base_rate_per_day = spec.base_rate_per_day;
  res.truth.horizon_days = spec.horizon_days;
  res.truth.start_epoch = spec.start_epoch;

  // contiguous item blocks per category
  double cum = 0.0;
  std::int64_t prev = 0;
  for (const auto& c : spec.categories) {
    cum += c.item_fraction;
    const auto end = static_cast<std::int64_t>(std::llround(cum * static_cast<double>(spec.num_items)));
    res.truth.categories.push_back({c, prev, end});
    prev = end;
  }

  EventLog& log = res.log;
  for (std::int64_t u = 0; u < spec.num_users; ++u) log.user_names.push_back("u" + std::to_string(u));
  for (std::int64_t i = 0; i < spec.num_items; ++i) log.item_names.push_back("i" + std::to_string(i));

  const double horizon_h = spec.horizon_days * 24.0;
  const double base_h = spec.base_rate_per_day / 24.0;

  struct PendingEvent {
    double t_hours;
    std::size_t category;
    std::int64_t item;
  };

  for (std::int64_t u = 0; u < spec.num_users; ++u) {
    std::vector<PendingEvent> events;
    for (std::size_t c = 0; c < spec.categories.size(); ++c) {
      const auto& prof = spec.categories[c];
      const auto& block = res.truth.categories[c];
      double max_atc = 0.0;
      for (int hour = 0; hour < 24; ++hour) {
        double a = 0.0;
        for (const auto& [peak, amp] : prof.atc_peaks) {
          if (peak == hour) a += amp;
        }
        max_atc = std::max(max_atc, a);
      }
      const double max_rtc = prof.has_rtc() ? prof.rtc_amplitude : 0.0;
      const double lam_max = base_h * (1.0 + max_atc) * (1.0 + max_rtc);

      Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(c)));
      double t = 0.0;
      double last = -1.0;
      for (;;) {
        t += rng.exponential(lam_max);
        if (t > horizon_h) break;
        const auto ts = spec.start_epoch + static_cast<std::int64_t>(std::floor(t * 3600.0));
        const double lam =
            res.truth.intensity_per_hour(c, ts, last < 0.0 ? -1.0 : t - last);
        if (rng.uniform01() * lam_max <= lam) {
          const auto span = static_cast<std::uint64_t>(block.item_end - block.item_begin);
          const auto item = block.item_begin + static_cast<std::int64_t>(rng.uniform_index(span));
          events.push_back({t, c, item});
          last = t;
        }
      }
    }
    std::sort(events.begin(), events.end(), [](const PendingEvent& a, const PendingEvent& b) {
      if (a.t_hours != b.t_hours) return a.t_hours < b.t_hours;
      if (a.category != b.category) return a.category < b.category;
      return a.item < b.item;
    });
    for (const auto& e : events) {
      EventRow row;
      row.user = u;
      row.item = e.item;
      row.time = spec.start_epoch + static_cast<std::int64_t>(std::floor(e.t_hours * 3600.0));
      row.label = 1;
      log.rows.push_back(row);
    }
  }
  return res;
}

}  // namespace dicycle
