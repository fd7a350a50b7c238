#include "agentloom/sim_device.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "agentloom/toolcall.hpp"
#include "json.hpp"

namespace agentloom::sim {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Fault profiles
// ---------------------------------------------------------------------------

FaultProfile fault_profile_by_name(const std::string& name) {
  if (name.empty() || name == "none") return {};
  if (name == "keyboard") return {0.3, 0.0, 0, 0};
  if (name == "focus") return {0.0, 0.25, 0, 0};
  if (name == "slow") return {0.0, 0.0, 2, 0};
  if (name == "flaky") return {0.3, 0.25, 1, 0};
  throw PreconditionViolation("unknown fault profile: " + name);
}

std::string describe_frames(const FrameLog& log) {
  std::set<std::string> distinct;
  for (const auto& [seq, digest] : log.frames) distinct.insert(digest);
  std::ostringstream os;
  os << "video summary: frames=" << log.frames.size()
     << " distinct=" << distinct.size();
  if (!log.frames.empty()) {
    os << " first=" << log.frames.front().second
       << " last=" << log.frames.back().second;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Selector resolution
// ---------------------------------------------------------------------------

const char* to_string(SelectorTier tier) {
  switch (tier) {
    case SelectorTier::kResourceId: return "resource_id";
    case SelectorTier::kCoordinates: return "coordinates";
    case SelectorTier::kText: return "text";
  }
  return "?";
}

namespace {

void smallest_containing(const UiNode& node, int x, int y,
                         const UiNode** best) {
  if (!node.bounds.contains_point(x, y)) return;
  if (*best == nullptr || node.bounds.area() < (*best)->bounds.area())
    *best = &node;
  for (const auto& child : node.children) smallest_containing(child, x, y, best);
}

const UiNode* first_with_text(const UiNode& node, std::string_view text) {
  if (node.text && *node.text == text) return &node;
  for (const auto& child : node.children)
    if (const UiNode* hit = first_with_text(child, text)) return hit;
  return nullptr;
}

}  // namespace

std::optional<Resolved> resolve_selector(const SelectorBundle& bundle,
                                         const UiNode& root) {
  if (!bundle.any())
    throw PreconditionViolation("selector bundle must carry a selector");
  if (bundle.resource_id) {
    if (const UiNode* hit = find_by_resource_id(root, *bundle.resource_id))
      return Resolved{hit, SelectorTier::kResourceId};
  }
  if (bundle.coordinates) {
    const UiNode* best = nullptr;
    smallest_containing(root, bundle.coordinates->x, bundle.coordinates->y,
                        &best);
    if (best) return Resolved{best, SelectorTier::kCoordinates};
  }
  if (bundle.text_match) {
    if (const UiNode* hit = first_with_text(root, *bundle.text_match))
      return Resolved{hit, SelectorTier::kText};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hierarchy serialization: one JSON object per line, indentation = depth.
// ---------------------------------------------------------------------------

namespace {

void serialize_node(const UiNode& node, int depth, std::ostringstream& os) {
  ordered_json j;
  j["id"] = node.node_id;
  if (node.resource_id) j["rid"] = *node.resource_id;
  if (node.text) j["text"] = *node.text;
  if (node.content_desc) j["desc"] = *node.content_desc;
  j["bounds"] = {node.bounds.x, node.bounds.y, node.bounds.w, node.bounds.h};
  if (node.focusable) j["focusable"] = true;
  if (node.focused) j["focused"] = true;
  if (node.editable) j["editable"] = true;
  os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << j.dump()
     << "\n";
  for (const auto& child : node.children)
    serialize_node(child, depth + 1, os);
}

}  // namespace

std::string serialize_hierarchy(const UiNode& root) {
  std::ostringstream os;
  serialize_node(root, 0, os);
  return os.str();
}

UiNode parse_hierarchy(const std::string& text) {
  std::vector<std::pair<int, UiNode>> stack;  // (depth, node) path
  UiNode root;
  bool have_root = false;
  for (const std::string& raw : split_lines(text)) {
    if (trim(raw).empty()) continue;
    std::size_t indent = 0;
    while (indent < raw.size() && raw[indent] == ' ') ++indent;
    int depth = static_cast<int>(indent / 2);
    ordered_json j = ordered_json::parse(raw.substr(indent));
    UiNode node;
    node.node_id = j.at("id").get<std::string>();
    if (j.contains("rid")) node.resource_id = j["rid"].get<std::string>();
    if (j.contains("text")) node.text = j["text"].get<std::string>();
    if (j.contains("desc")) node.content_desc = j["desc"].get<std::string>();
    auto b = j.at("bounds");
    node.bounds = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(),
                   b[3].get<int>()};
    node.focusable = j.value("focusable", false);
    node.focused = j.value("focused", false);
    node.editable = j.value("editable", false);
    if (depth == 0) {
      if (have_root) throw PreconditionViolation("multiple hierarchy roots");
      root = std::move(node);
      have_root = true;
      stack = {{0, UiNode{}}};  // placeholder; root handled separately
      continue;
    }
    // Walk from root along the current rightmost path to depth-1.
    UiNode* parent = &root;
    for (int d = 1; d < depth; ++d) {
      if (parent->children.empty())
        throw PreconditionViolation("bad hierarchy indentation");
      parent = &parent->children.back();
    }
    parent->children.push_back(std::move(node));
  }
  if (!have_root) throw PreconditionViolation("empty hierarchy text");
  return root;
}

const char* to_string(ActionResult::Status status) {
  switch (status) {
    case ActionResult::Status::kOk: return "ok";
    case ActionResult::Status::kFailed: return "failed";
    case ActionResult::Status::kAborted: return "aborted";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// App definition loading
// ---------------------------------------------------------------------------

namespace {

DataOp parse_op(const ordered_json& j) {
  DataOp op;
  op.op = j.at("op").get<std::string>();
  op.collection = j.value("collection", "");
  op.key = j.value("key", "");
  op.value = j.value("value", "");
  op.screen = j.value("screen", "");
  if (j.contains("fields"))
    for (auto it = j["fields"].begin(); it != j["fields"].end(); ++it)
      op.fields[it.key()] = it.value().get<std::string>();
  return op;
}

}  // namespace

SimAppDef load_app_definition(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text);
  SimAppDef def;
  def.package = j.at("package").get<std::string>();
  def.label = j.value("label", def.package);
  def.initial_screen = j.at("initial_screen").get<std::string>();
  if (j.contains("prefs"))
    for (auto it = j["prefs"].begin(); it != j["prefs"].end(); ++it)
      def.initial_prefs[it.key()] = it.value().get<std::string>();
  if (j.contains("data")) {
    for (auto it = j["data"].begin(); it != j["data"].end(); ++it) {
      std::vector<Record> records;
      for (const auto& rec : it.value()) {
        Record r;
        for (auto f = rec.begin(); f != rec.end(); ++f)
          r[f.key()] = f.value().get<std::string>();
        records.push_back(std::move(r));
      }
      def.initial_data[it.key()] = std::move(records);
    }
  }
  for (const auto& js : j.at("screens")) {
    ScreenDef screen;
    screen.name = js.at("name").get<std::string>();
    for (const auto& jn : js.at("nodes")) {
      NodeTemplate node;
      node.id = jn.at("id").get<std::string>();
      node.text = jn.value("text", "");
      node.content_desc = jn.value("desc", "");
      node.editable = jn.value("editable", false);
      node.focusable = jn.value("focusable", node.editable);
      node.bind_collection = jn.value("bind", "");
      node.item_text = jn.value("item_text", "");
      node.bind_offset = jn.value("bind_offset", 0);
      node.bind_limit = jn.value("bind_limit", -1);
      screen.nodes.push_back(std::move(node));
    }
    if (js.contains("transitions")) {
      for (const auto& jt : js["transitions"]) {
        TransitionDef t;
        t.next = jt.value("next", "");
        t.require_nonempty_field = jt.value("require_nonempty_field", "");
        t.guard_fail_next = jt.value("guard_fail_next", "");
        if (jt.contains("ops"))
          for (const auto& jo : jt["ops"]) t.ops.push_back(parse_op(jo));
        screen.transitions[jt.at("on").get<std::string>()] = std::move(t);
      }
    }
    def.screens[screen.name] = std::move(screen);
  }
  if (!def.screens.count(def.initial_screen))
    throw PreconditionViolation("initial screen missing in app " + def.package);
  return def;
}

SimAppDef load_app_definition_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionViolation("cannot open app definition: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return load_app_definition(os.str());
}

std::vector<SimAppDef> load_apps_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<SimAppDef> apps;
  for (const auto& path : paths) apps.push_back(load_app_definition_file(path));
  return apps;
}

// ---------------------------------------------------------------------------
// SimDevice
// ---------------------------------------------------------------------------

namespace {

constexpr int kScreenW = 1080;
constexpr int kScreenH = 1920;

SimAppDef home_app(const std::vector<SimAppDef>& apps) {
  SimAppDef home;
  home.package = "home";
  home.label = "Home";
  home.initial_screen = "main";
  ScreenDef main;
  main.name = "main";
  NodeTemplate title;
  title.id = "home_title";
  title.text = "Home";
  main.nodes.push_back(title);
  for (const auto& app : apps) {
    NodeTemplate icon;
    icon.id = "app_" + app.package;
    icon.text = app.label;
    icon.content_desc = "Launch " + app.label;
    icon.focusable = true;
    main.nodes.push_back(icon);
  }
  home.screens["main"] = std::move(main);
  return home;
}

}  // namespace

SimDevice::SimDevice(std::vector<SimAppDef> apps, FaultProfile profile)
    : profile_(profile) {
  SimAppDef home = home_app(apps);
  apps.push_back(home);
  for (auto& def : apps) {
    AppRuntime rt;
    rt.current_screen = def.initial_screen;
    rt.data = def.initial_data;
    rt.prefs = def.initial_prefs;
    w_.apps[def.package] = std::move(rt);
    defs_[def.package] = std::move(def);
  }
  w_.foreground = "home";
  w_.rng = DetRng(profile.rng_seed);
}

std::string SimDevice::field_key(const std::string& screen,
                                 const std::string& rid) const {
  return screen + "|" + rid;
}

SimDevice::AppRuntime& SimDevice::fg_app_locked() {
  return w_.apps.at(w_.foreground);
}

const SimAppDef& SimDevice::fg_def_locked() const {
  return defs_.at(w_.foreground);
}

std::string SimDevice::expand_text_locked(const AppRuntime& app,
                                          const std::string& tmpl) const {
  std::string out = tmpl;
  // {pref:KEY}
  std::size_t pos;
  while ((pos = out.find("{pref:")) != std::string::npos) {
    std::size_t end = out.find('}', pos);
    if (end == std::string::npos) break;
    std::string key = out.substr(pos + 6, end - pos - 6);
    auto it = app.prefs.find(key);
    out.replace(pos, end - pos + 1, it == app.prefs.end() ? "" : it->second);
  }
  // {sel:COLLECTION:FIELD} -> field of the currently selected record
  while ((pos = out.find("{sel:")) != std::string::npos) {
    std::size_t end = out.find('}', pos);
    if (end == std::string::npos) break;
    std::string body = out.substr(pos + 5, end - pos - 5);
    std::string replacement;
    std::size_t colon = body.find(':');
    if (colon != std::string::npos) {
      std::string coll = body.substr(0, colon);
      std::string field = body.substr(colon + 1);
      auto sel = app.prefs.find("_sel_" + coll);
      auto data = app.data.find(coll);
      if (sel != app.prefs.end() && data != app.data.end()) {
        std::size_t index = std::stoul(sel->second);
        if (index < data->second.size()) {
          auto f = data->second[index].find(field);
          if (f != data->second[index].end()) replacement = f->second;
        }
      }
    }
    out.replace(pos, end - pos + 1, replacement);
  }
  return out;
}

UiNode SimDevice::render_screen_locked(const SimAppDef& def,
                                       const AppRuntime& app,
                                       const std::string& screen_name) const {
  const ScreenDef& screen = def.screens.at(screen_name);
  UiNode root;
  root.node_id = def.package + "/" + screen_name;
  root.resource_id = "root";
  root.bounds = {0, 0, kScreenW, kScreenH};

  int y = 120;
  for (const auto& tmpl : screen.nodes) {
    UiNode node;
    node.node_id = tmpl.id;
    node.resource_id = tmpl.id;
    node.focusable = tmpl.focusable;
    node.editable = tmpl.editable;
    if (!tmpl.content_desc.empty()) node.content_desc = tmpl.content_desc;

    if (!tmpl.bind_collection.empty()) {
      auto it = app.data.find(tmpl.bind_collection);
      const std::vector<Record> empty;
      const std::vector<Record>& records =
          it == app.data.end() ? empty : it->second;
      std::size_t first = static_cast<std::size_t>(std::max(0, tmpl.bind_offset));
      std::size_t last = records.size();
      if (tmpl.bind_limit >= 0)
        last = std::min(last, first + static_cast<std::size_t>(tmpl.bind_limit));
      int inner_y = y + 10;
      int shown = 0;
      // Item ids carry the global record index so selection survives paging.
      for (std::size_t i = first; i < last; ++i) {
        UiNode item;
        item.node_id = tmpl.id + "_item_" + std::to_string(i);
        item.resource_id =
            "item_" + tmpl.bind_collection + "_" + std::to_string(i);
        std::string text = tmpl.item_text;
        for (const auto& [k, v] : records[i])
          text = replace_all(text, "{" + k + "}", v);
        item.text = text;
        item.focusable = true;
        item.bounds = {60, inner_y, kScreenW - 120, 80};
        inner_y += 90;
        node.children.push_back(std::move(item));
        ++shown;
      }
      int height = std::max(100, 20 + 90 * shown);
      node.bounds = {40, y, kScreenW - 80, height};
      node.text = "";
      y += height + 20;
    } else {
      if (tmpl.editable) {
        auto it = app.fields.find(field_key(screen_name, tmpl.id));
        node.text = it == app.fields.end() ? "" : it->second;
        node.focused = w_.focus && w_.focus->package == def.package &&
                       w_.focus->screen == screen_name &&
                       w_.focus->rid == tmpl.id;
      } else {
        node.text = expand_text_locked(app, tmpl.text);
      }
      node.bounds = {40, y, kScreenW - 80, 100};
      y += 120;
    }
    root.children.push_back(std::move(node));
  }
  return root;
}

UiNode SimDevice::render_locked() const {
  const SimAppDef& def = defs_.at(w_.foreground);
  const AppRuntime& app = w_.apps.at(w_.foreground);
  return render_screen_locked(def, app, app.current_screen);
}

std::string SimDevice::digest_locked() const {
  return digest_hex(serialize_hierarchy(render_locked()) + "\x1f" +
                    w_.foreground);
}

DeviceState SimDevice::state_locked() const {
  DeviceState state;
  state.hierarchy = render_locked();
  state.screenshot_digest = digest_locked();
  state.focused_package = w_.foreground;
  state.timestamp = virtual_timestamp(w_.ticks);
  state.seq = w_.seq;
  return state;
}

DeviceState SimDevice::get_state() {
  std::lock_guard lock(mu_);
  return state_locked();
}

void SimDevice::begin_mutation_locked() {
  w_.seq += 1;
  int steps = 1 + profile_.latency_ticks;
  for (int i = 0; i < steps; ++i) {
    w_.ticks += 1;
    // Timed screen transitions fire once per elapsed tick.
    AppRuntime& app = fg_app_locked();
    const SimAppDef& def = fg_def_locked();
    auto screen = def.screens.find(app.current_screen);
    if (screen != def.screens.end()) {
      auto t = screen->second.transitions.find("tick");
      if (t != screen->second.transitions.end()) {
        apply_ops_locked(t->second.ops, std::nullopt);
        if (!t->second.next.empty()) enter_screen_locked(t->second.next);
      }
    }
  }
}

void SimDevice::end_mutation_locked() {
  if (w_.recording) w_.frames.frames.emplace_back(w_.seq, digest_locked());
}

void SimDevice::enter_screen_locked(const std::string& screen) {
  AppRuntime& app = fg_app_locked();
  if (app.current_screen != screen) {
    app.current_screen = screen;
    w_.focus.reset();  // navigation drops field focus
  }
}

void SimDevice::apply_ops_locked(const std::vector<DataOp>& ops,
                                 std::optional<std::size_t> item_index) {
  AppRuntime& app = fg_app_locked();
  for (const auto& op : ops) {
    if (op.op == "append_record") {
      Record record;
      for (const auto& [field, value] : op.fields) {
        if (starts_with(value, "{field:") && ends_with(value, "}")) {
          std::string rid = value.substr(7, value.size() - 8);
          auto it = app.fields.find(field_key(app.current_screen, rid));
          record[field] = it == app.fields.end() ? "" : it->second;
        } else {
          record[field] = value;
        }
      }
      app.data[op.collection].push_back(std::move(record));
    } else if (op.op == "set_pref") {
      app.prefs[op.key] = op.value;
    } else if (op.op == "toggle_pref") {
      std::string& v = app.prefs[op.key];
      v = (v == "on") ? "off" : "on";
    } else if (op.op == "clear_fields") {
      std::string prefix = (op.screen.empty() ? app.current_screen : op.screen) + "|";
      for (auto it = app.fields.begin(); it != app.fields.end();) {
        if (starts_with(it->first, prefix))
          it = app.fields.erase(it);
        else
          ++it;
      }
    } else if (op.op == "select") {
      if (item_index)
        app.prefs["_sel_" + op.collection] = std::to_string(*item_index);
    } else {
      throw PreconditionViolation("unknown data op: " + op.op);
    }
  }
}

ActionResult SimDevice::fire_transition_locked(
    const std::string& trigger, std::optional<std::size_t> item_index,
    std::uint64_t seq_before) {
  AppRuntime& app = fg_app_locked();
  const SimAppDef& def = fg_def_locked();
  const ScreenDef& screen = def.screens.at(app.current_screen);
  auto it = screen.transitions.find(trigger);
  if (it == screen.transitions.end())
    return {ActionResult::Status::kOk, "no-op", seq_before, w_.seq};
  const TransitionDef& t = it->second;
  if (!t.require_nonempty_field.empty()) {
    auto f = app.fields.find(
        field_key(app.current_screen, t.require_nonempty_field));
    if (f == app.fields.end() || f->second.empty()) {
      if (!t.guard_fail_next.empty()) enter_screen_locked(t.guard_fail_next);
      return {ActionResult::Status::kOk,
              "guard failed: " + t.require_nonempty_field + " empty",
              seq_before, w_.seq};
    }
  }
  apply_ops_locked(t.ops, item_index);
  if (!t.next.empty()) enter_screen_locked(t.next);
  return {ActionResult::Status::kOk, "transition:" + trigger, seq_before,
          w_.seq};
}

ActionResult SimDevice::tap(const SelectorBundle& selector) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  UiNode root = render_locked();
  auto hit = resolve_selector(selector, root);
  if (!hit)
    return ActionResult::failure("ElementNotFound: " + selector.canonical(),
                                 seq_before);
  begin_mutation_locked();
  const std::string rid =
      hit->node->resource_id ? *hit->node->resource_id : hit->node->node_id;

  ActionResult result;
  AppRuntime& app = fg_app_locked();
  if (starts_with(rid, "item_")) {
    // item_<collection>_<index>: per-item transitions key on "item:<collection>".
    std::string rest = rid.substr(5);
    std::size_t us = rest.rfind('_');
    std::string collection = rest.substr(0, us);
    std::size_t index = std::stoul(rest.substr(us + 1));
    result = fire_transition_locked("item:" + collection + ":tap", index,
                                    seq_before);
  } else {
    result = fire_transition_locked(rid + ":tap", std::nullopt, seq_before);
  }

  if (result.ok() && result.detail == "no-op" && hit->node->editable) {
    // Tapping an editable field is a focus attempt, same fault model as
    // focus().
    if (!w_.rng.chance(profile_.focus_steal_prob)) {
      w_.focus = FocusRef{w_.foreground, app.current_screen, rid};
      w_.cursors[w_.foreground + "|" + app.current_screen + "|" + rid] = 0;
    }
    result.detail = "focus:" + rid;
  }
  result.detail += " [tier=" + std::string(to_string(hit->tier)) + "]";
  end_mutation_locked();
  result.seq_after = w_.seq;
  return result;
}

ActionResult SimDevice::swipe(const std::string& direction, int amount) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  begin_mutation_locked();
  ActionResult result = fire_transition_locked("swipe:" + direction,
                                               std::nullopt, seq_before);
  (void)amount;  // single-page model: amount has no further effect
  end_mutation_locked();
  result.seq_after = w_.seq;
  return result;
}

ActionResult SimDevice::type_text(const std::string& raw) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  AppRuntime& app = fg_app_locked();
  if (!w_.focus || w_.focus->package != w_.foreground ||
      w_.focus->screen != app.current_screen)
    return ActionResult::failure("NoFocusedField", seq_before);
  begin_mutation_locked();
  const std::string key = field_key(w_.focus->screen, w_.focus->rid);
  const std::string cursor_key =
      w_.focus->package + "|" + w_.focus->screen + "|" + w_.focus->rid;
  std::string& value = fg_app_locked().fields[key];
  std::size_t& cursor = w_.cursors[cursor_key];
  cursor = std::min(cursor, value.size());
  int dropped = 0;
  for (char c : raw) {
    if (c == '\b') {
      // Deletions are reliable; only printable input is subject to drops.
      if (cursor > 0) {
        value.erase(cursor - 1, 1);
        --cursor;
      }
      continue;
    }
    if (profile_.char_drop_prob > 0.0 &&
        w_.rng.chance(profile_.char_drop_prob)) {
      ++dropped;
      continue;
    }
    value.insert(cursor, 1, c);
    ++cursor;
  }
  end_mutation_locked();
  std::ostringstream os;
  os << "typed " << raw.size() << " char(s), dropped " << dropped;
  return {ActionResult::Status::kOk, os.str(), seq_before, w_.seq};
}

ActionResult SimDevice::press_back() {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  begin_mutation_locked();
  AppRuntime& app = fg_app_locked();
  const SimAppDef& def = fg_def_locked();
  const ScreenDef& screen = def.screens.at(app.current_screen);
  auto it = screen.transitions.find("back");
  ActionResult result;
  if (it != screen.transitions.end()) {
    result = fire_transition_locked("back", std::nullopt, seq_before);
  } else if (w_.foreground != "home") {
    w_.foreground = "home";
    w_.focus.reset();
    result = {ActionResult::Status::kOk, "back:home", seq_before, w_.seq};
  } else {
    result = {ActionResult::Status::kOk, "no-op", seq_before, w_.seq};
  }
  end_mutation_locked();
  result.seq_after = w_.seq;
  return result;
}

ActionResult SimDevice::launch_app(const std::string& package) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  auto it = defs_.find(package);
  if (it == defs_.end())
    return ActionResult::failure("UnknownApp: " + package, seq_before);
  begin_mutation_locked();
  w_.foreground = package;
  // Cold start: back to the initial screen; app data and drafts persist.
  w_.apps.at(package).current_screen = it->second.initial_screen;
  w_.focus.reset();
  end_mutation_locked();
  return {ActionResult::Status::kOk, "launched:" + package, seq_before,
          w_.seq};
}

ActionResult SimDevice::focus(const SelectorBundle& selector) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  UiNode root = render_locked();
  auto hit = resolve_selector(selector, root);
  if (!hit)
    return ActionResult::failure("ElementNotFound: " + selector.canonical(),
                                 seq_before);
  if (!hit->node->editable) {
    const std::string rid =
        hit->node->resource_id ? *hit->node->resource_id : hit->node->node_id;
    return ActionResult::failure("FieldNotEditable: " + rid, seq_before);
  }
  begin_mutation_locked();
  const std::string rid = *hit->node->resource_id;
  AppRuntime& app = fg_app_locked();
  if (w_.rng.chance(profile_.focus_steal_prob)) {
    // Silent failure: reports success, focus not acquired.
    end_mutation_locked();
    return {ActionResult::Status::kOk,
            "focus:" + rid + " [tier=" + to_string(hit->tier) + "]",
            seq_before, w_.seq};
  }
  w_.focus = FocusRef{w_.foreground, app.current_screen, rid};
  w_.cursors[w_.foreground + "|" + app.current_screen + "|" + rid] = 0;
  end_mutation_locked();
  return {ActionResult::Status::kOk,
          "focus:" + rid + " [tier=" + to_string(hit->tier) + "]", seq_before,
          w_.seq};
}

ActionResult SimDevice::set_cursor_end(const SelectorBundle& selector) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  UiNode root = render_locked();
  auto hit = resolve_selector(selector, root);
  if (!hit)
    return ActionResult::failure("ElementNotFound: " + selector.canonical(),
                                 seq_before);
  if (!hit->node->editable)
    return ActionResult::failure("FieldNotEditable: " + hit->node->node_id,
                                 seq_before);
  begin_mutation_locked();
  const std::string rid = *hit->node->resource_id;
  AppRuntime& app = fg_app_locked();
  auto field = app.fields.find(field_key(app.current_screen, rid));
  std::size_t len = field == app.fields.end() ? 0 : field->second.size();
  w_.cursors[w_.foreground + "|" + app.current_screen + "|" + rid] = len;
  end_mutation_locked();
  return {ActionResult::Status::kOk, "cursor_end:" + rid, seq_before, w_.seq};
}

ActionResult SimDevice::wait_tick() {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  begin_mutation_locked();
  end_mutation_locked();
  return {ActionResult::Status::kOk, "waited", seq_before, w_.seq};
}

ActionResult SimDevice::start_recording() {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  begin_mutation_locked();
  w_.recording = true;
  w_.frames = FrameLog{};
  w_.frames.frames.emplace_back(w_.seq, digest_locked());
  return {ActionResult::Status::kOk, "recording", seq_before, w_.seq};
}

ActionResult SimDevice::stop_recording(FrameLog& out) {
  std::lock_guard lock(mu_);
  std::uint64_t seq_before = w_.seq;
  begin_mutation_locked();
  w_.recording = false;
  out = std::move(w_.frames);
  w_.frames = FrameLog{};
  return {ActionResult::Status::kOk, "stopped", seq_before, w_.seq};
}

std::string SimDevice::snapshot() {
  std::lock_guard lock(mu_);
  std::string id = "snap_" + std::to_string(++snapshot_counter_);
  snapshots_[id] = w_;
  return id;
}

void SimDevice::restore(const std::string& snapshot_id) {
  std::lock_guard lock(mu_);
  auto it = snapshots_.find(snapshot_id);
  if (it == snapshots_.end()) throw UnknownSnapshot(snapshot_id);
  std::uint64_t seq = w_.seq;
  std::uint64_t ticks = w_.ticks;
  w_ = it->second;
  // Restore is itself a mutation; seq never runs backwards.
  w_.seq = std::max(seq, w_.seq) + 1;
  w_.ticks = std::max(ticks, w_.ticks) + 1;
}

WorldView SimDevice::export_world() {
  std::lock_guard lock(mu_);
  WorldView view;
  view.state = state_locked();
  view.foreground = w_.foreground;
  for (const auto& [package, app] : w_.apps) {
    AppDataView data;
    data.current_screen = app.current_screen;
    data.collections = app.data;
    data.prefs = app.prefs;
    view.apps[package] = std::move(data);
  }
  return view;
}

// ---------------------------------------------------------------------------
// Raw dispatch
// ---------------------------------------------------------------------------

ActionResult apply_action(DeviceController& device,
                          const exec::ToolCall& call) {
  switch (call.name) {
    case ActionKind::kTap:
      if (!call.selector)
        return ActionResult::failure("tap requires a selector", 0);
      return device.tap(*call.selector);
    case ActionKind::kSwipe:
      return device.swipe(call.payload.value_or("down"), 1);
    case ActionKind::kTypeText:
      return device.type_text(call.payload.value_or(""));
    case ActionKind::kBack:
      return device.press_back();
    case ActionKind::kLaunchApp:
      return device.launch_app(call.payload.value_or(""));
    case ActionKind::kWait:
      return device.wait_tick();
    case ActionKind::kStartRecording:
      return device.start_recording();
    case ActionKind::kStopRecording: {
      FrameLog log;
      ActionResult result = device.stop_recording(log);
      result.detail = describe_frames(log);
      return result;
    }
    case ActionKind::kSaveNote:
    case ActionKind::kReadNote:
    case ActionKind::kListNotes:
      return ActionResult::failure(
          std::string("not a device action: ") + to_string(call.name), 0);
    case ActionKind::kUnknown:
      break;
  }
  return ActionResult::failure("unknown action: " + call.raw_name, 0);
}

std::unique_ptr<SimDevice> make_device(const std::string& assets_dir,
                                       const std::string& preset,
                                       FaultProfile profile,
                                       std::uint64_t seed) {
  if (preset != "home_default")
    throw PreconditionViolation("unknown device preset: " + preset);
  profile.rng_seed = seed;
  return std::make_unique<SimDevice>(load_apps_dir(assets_dir + "/apps"),
                                     profile);
}

}  // namespace agentloom::sim
