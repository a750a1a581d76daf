#pragma once
// Summary generators behind process and HTTP boundaries. Both exchange the
// same JSON shapes: request {"group_id", "text", "max_tokens"}, response
// {"text"}. Any transport or protocol failure surfaces as
// GeneratorUnavailable so coarsening can fall back.

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "hiermem/coarsen.hpp"
#include "hiermem/errors.hpp"

namespace hiermem {

inline std::string gen_request_json(const GenRequest& req) {
    nlohmann::json j{{"group_id", req.group_id}, {"text", req.concat_text},
                     {"max_tokens", req.max_tokens}};
    return j.dump();
}

inline GenResponse gen_response_from_json(const std::string& body) {
    try {
        nlohmann::json j = nlohmann::json::parse(body);
        return {j.at("text").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw GeneratorUnavailable(std::string("bad response body: ") + e.what());
    }
}

// POSTs to http://host:port/path and expects a 2xx JSON response.
class HttpGeneratorClient : public GeneratorClient {
  public:
    HttpGeneratorClient(std::string host, int port, std::string path = "/generate",
                        int timeout_seconds = 5)
        : host_(std::move(host)), port_(port), path_(std::move(path)),
          timeout_seconds_(timeout_seconds) {}

    GenResponse generate(const GenRequest& req) override {
        httplib::Client client(host_, port_);
        client.set_connection_timeout(timeout_seconds_, 0);
        client.set_read_timeout(timeout_seconds_, 0);
        auto res = client.Post(path_, gen_request_json(req), "application/json");
        if (!res) {
            throw GeneratorUnavailable("no response from " + host_ + ":" +
                                       std::to_string(port_));
        }
        if (res->status < 200 || res->status >= 300) {
            throw GeneratorUnavailable("status " + std::to_string(res->status) + " from " +
                                       host_ + ":" + std::to_string(port_));
        }
        return gen_response_from_json(res->body);
    }

  private:
    std::string host_;
    int port_;
    std::string path_;
    int timeout_seconds_;
};

// Runs a command per request: request JSON on stdin, response JSON expected
// on stdout. Suited to local helper scripts.
class CommandGeneratorClient : public GeneratorClient {
  public:
    explicit CommandGeneratorClient(std::string command) : command_(std::move(command)) {}

    GenResponse generate(const GenRequest& req) override {
        const std::string req_file =
            "/tmp/hiermem_gen_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) +
            ".json";
        {
            std::ofstream out(req_file);
            if (!out) throw GeneratorUnavailable("cannot stage request at " + req_file);
            out << gen_request_json(req);
        }
        const std::string cmdline = command_ + " < " + req_file;
        FILE* pipe = ::popen(cmdline.c_str(), "r");
        if (!pipe) throw GeneratorUnavailable("cannot launch '" + command_ + "'");
        std::string body;
        char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) body.append(buf, got);
        const int rc = ::pclose(pipe);
        std::remove(req_file.c_str());
        if (rc != 0) {
            throw GeneratorUnavailable("'" + command_ + "' exited with " + std::to_string(rc));
        }
        return gen_response_from_json(body);
    }

  private:
    std::string command_;
};

}  // namespace hiermem
