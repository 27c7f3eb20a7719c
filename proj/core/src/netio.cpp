#include "phaseopt/netio.hpp"

#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace phaseopt::net {

using json = nlohmann::ordered_json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed document " + path + ": " + e.what());
  }
  return doc;
}

void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

}  // namespace

void validate_network(const NetworkSpec& network) {
  std::unordered_set<std::string> node_set(network.nodes.begin(), network.nodes.end());
  if (node_set.size() != network.nodes.size()) {
    throw std::runtime_error("network has duplicate node ids");
  }
  for (const auto& c : network.centroids) {
    if (!node_set.count(c)) throw std::runtime_error("centroid " + c + " is not a node");
  }
  std::unordered_set<std::string> link_ids;
  for (const auto& l : network.links) {
    if (!link_ids.insert(l.id).second) throw std::runtime_error("duplicate link id " + l.id);
    if (!node_set.count(l.from_node) || !node_set.count(l.to_node)) {
      throw std::runtime_error("link " + l.id + " references an unknown node");
    }
    if (l.free_flow_time <= 0.0) throw std::runtime_error("link " + l.id + " free_flow_time must be positive");
    if (l.capacity <= 0.0) throw std::runtime_error("link " + l.id + " capacity must be positive");
    if (l.lanes < 1) throw std::runtime_error("link " + l.id + " must have at least one lane");
  }
  std::unordered_set<std::string> controller_ids;
  for (const auto& c : network.controllers) {
    if (!controller_ids.insert(c.id).second) throw std::runtime_error("duplicate controller id " + c.id);
    if (!node_set.count(c.id)) throw std::runtime_error("controller " + c.id + " is not at a known node");
    if (c.cycle_length <= 0) throw std::runtime_error("controller " + c.id + " cycle must be positive");
    if (c.phase_movements.empty()) throw std::runtime_error("controller " + c.id + " has no phases");
    for (const auto& phase : c.phase_movements) {
      for (const auto& link_id : phase) {
        const Link* l = network.find_link(link_id);
        if (!l) throw std::runtime_error("controller " + c.id + " grants unknown link " + link_id);
        if (l->to_node != c.id) {
          throw std::runtime_error("controller " + c.id + " grants link " + link_id +
                                   " which does not enter its node");
        }
      }
    }
  }
  // the two encodings of signal control must agree
  for (const auto& l : network.links) {
    std::set<std::pair<std::string, int>> from_controllers;
    for (const auto& c : network.controllers) {
      for (std::size_t k = 0; k < c.phase_movements.size(); ++k) {
        for (const auto& link_id : c.phase_movements[k]) {
          if (link_id == l.id) from_controllers.insert({c.id, static_cast<int>(k)});
        }
      }
    }
    std::set<std::pair<std::string, int>> from_link;
    if (l.controlled_by) {
      for (int k : l.controlled_by->phases) from_link.insert({l.controlled_by->controller, k});
    }
    if (from_link != from_controllers) {
      throw std::runtime_error("link " + l.id + " control does not match the controller phase table");
    }
  }
  for (const auto& [od, d] : network.demand) {
    if (d < 0.0) throw std::runtime_error("negative demand for OD " + od.first + "->" + od.second);
    if (od.first == od.second) throw std::runtime_error("demand between " + od.first + " and itself");
    if (!network.is_centroid(od.first) || !network.is_centroid(od.second)) {
      throw std::runtime_error("demand OD " + od.first + "->" + od.second + " must join centroids");
    }
  }
  for (const auto& [od, routes] : network.routes) {
    for (const auto& r : routes) {
      if (r.links.empty()) throw std::runtime_error("empty route for OD " + od.first + "->" + od.second);
      std::string at = od.first;
      for (const auto& link_id : r.links) {
        const Link* l = network.find_link(link_id);
        if (!l) throw std::runtime_error("route for OD " + od.first + "->" + od.second +
                                         " uses unknown link " + link_id);
        if (l->from_node != at) {
          throw std::runtime_error("route for OD " + od.first + "->" + od.second +
                                   " breaks at link " + link_id);
        }
        at = l->to_node;
      }
      if (at != od.second) {
        throw std::runtime_error("route for OD " + od.first + "->" + od.second +
                                 " ends at " + at);
      }
    }
  }
}

NetworkSpec load_network(const std::string& path) {
  const json doc = read_json_file(path);
  for (const char* key : {"nodes", "links", "centroids", "demand", "controllers"}) {
    if (!doc.contains(key)) throw std::runtime_error(path + " is missing top-level key '" + key + "'");
  }
  NetworkSpec net;
  net.nodes = doc.at("nodes").get<std::vector<std::string>>();
  net.centroids = doc.at("centroids").get<std::vector<std::string>>();
  for (const auto& jl : doc.at("links")) {
    Link l;
    l.id = jl.at("id").get<std::string>();
    l.from_node = jl.at("from").get<std::string>();
    l.to_node = jl.at("to").get<std::string>();
    l.free_flow_time = jl.at("free_flow_time").get<double>();
    l.capacity = jl.at("capacity").get<double>();
    l.lanes = jl.value("lanes", 1);
    net.links.push_back(std::move(l));
  }
  for (const auto& jc : doc.at("controllers")) {
    SignalController c;
    c.id = jc.at("id").get<std::string>();
    c.cycle_length = jc.at("cycle_length").get<int>();
    for (const auto& phase : jc.at("phases")) {
      c.phase_movements.push_back(phase.get<std::vector<std::string>>());
    }
    net.controllers.push_back(std::move(c));
  }
  // derive per-link control from the controllers
  for (const auto& c : net.controllers) {
    for (std::size_t k = 0; k < c.phase_movements.size(); ++k) {
      for (const auto& link_id : c.phase_movements[k]) {
        for (auto& l : net.links) {
          if (l.id != link_id) continue;
          if (!l.controlled_by) l.controlled_by = LinkControl{c.id, {}};
          if (l.controlled_by->controller != c.id) {
            throw std::runtime_error("link " + link_id + " is granted green by two controllers");
          }
          l.controlled_by->phases.push_back(static_cast<int>(k));
        }
      }
    }
  }
  for (const auto& jd : doc.at("demand")) {
    const auto from = jd.at("from").get<std::string>();
    const auto to = jd.at("to").get<std::string>();
    const double vph = jd.at("vph").get<double>();
    if (vph > 0.0) net.demand[{from, to}] = vph;
  }
  if (doc.contains("routes")) {
    for (const auto& [key, jroutes] : doc.at("routes").items()) {
      const auto sep = key.find("->");
      if (sep == std::string::npos) throw std::runtime_error("route key '" + key + "' is not 'o->d'");
      OdPair od{key.substr(0, sep), key.substr(sep + 2)};
      std::vector<Route> routes;
      for (const auto& jr : jroutes) {
        routes.push_back(Route{jr.get<std::vector<std::string>>()});
      }
      net.routes[od] = std::move(routes);
    }
  } else {
    attach_routes(net, 4);
  }
  validate_network(net);
  return net;
}

void save_network(const NetworkSpec& network, const std::string& path) {
  json doc;
  doc["nodes"] = network.nodes;
  doc["links"] = json::array();
  for (const auto& l : network.links) {
    json jl;
    jl["id"] = l.id;
    jl["from"] = l.from_node;
    jl["to"] = l.to_node;
    jl["free_flow_time"] = l.free_flow_time;
    jl["capacity"] = l.capacity;
    jl["lanes"] = l.lanes;
    doc["links"].push_back(jl);
  }
  doc["centroids"] = network.centroids;
  doc["demand"] = json::array();
  for (const auto& [od, d] : network.demand) {
    doc["demand"].push_back({{"from", od.first}, {"to", od.second}, {"vph", d}});
  }
  doc["routes"] = json::object();
  for (const auto& [od, routes] : network.routes) {
    json jroutes = json::array();
    for (const auto& r : routes) jroutes.push_back(r.links);
    doc["routes"][od.first + "->" + od.second] = jroutes;
  }
  doc["controllers"] = json::array();
  for (const auto& c : network.controllers) {
    json jc;
    jc["id"] = c.id;
    jc["cycle_length"] = c.cycle_length;
    jc["phases"] = c.phase_movements;
    doc["controllers"].push_back(jc);
  }
  write_json_file(doc, path);
}

std::vector<int> plan_to_array(const SignalPlan& plan) {
  std::vector<int> out;
  for (const auto& t : plan.timings) {
    out.insert(out.end(), t.durations.begin(), t.durations.end());
  }
  return out;
}

SignalPlan plan_from_array(const NetworkSpec& network, const std::vector<int>& durations) {
  std::size_t expected = 0;
  for (const auto& c : network.controllers) expected += c.phase_movements.size();
  if (durations.size() != expected) {
    throw std::runtime_error("plan array has " + std::to_string(durations.size()) +
                             " entries, network needs " + std::to_string(expected));
  }
  SignalPlan plan;
  std::size_t at = 0;
  for (const auto& c : network.controllers) {
    ControllerTiming t;
    t.controller = c.id;
    t.cycle_length = c.cycle_length;
    t.durations.assign(durations.begin() + at, durations.begin() + at + c.phase_movements.size());
    at += c.phase_movements.size();
    plan.timings.push_back(std::move(t));
  }
  return plan;
}

SignalPlan load_plan(const std::string& path, const NetworkSpec& network) {
  const json doc = read_json_file(path);
  if (!doc.is_array()) throw std::runtime_error("plan file " + path + " must be a flat integer array");
  return plan_from_array(network, doc.get<std::vector<int>>());
}

void save_plan(const SignalPlan& plan, const std::string& path) {
  write_json_file(json(plan_to_array(plan)), path);
}

}  // namespace phaseopt::net
