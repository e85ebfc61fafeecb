#pragma once

#include "stcert/backends.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

namespace stcert
{

/// 120 s unless STCERT_BACKEND_TIMEOUT_S is set to a positive number.
std::chrono::milliseconds default_backend_timeout();

/// A child process speaking newline-delimited JSON on stdin/stdout.
///
/// Requests carry a unique integer id; responses are matched by id, so the
/// child may answer out of order. Thread-safe: many callers may have requests
/// in flight at once. A malformed line poisons the channel (every pending and
/// later request fails with ProtocolError).
class LineChannel
{
public:
    LineChannel(const std::string& command, std::chrono::milliseconds timeout);
    ~LineChannel();

    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;

    /// Sends `message` (an object without "id") and waits for the matching
    /// response. Throws TimeoutError, ProtocolError, or BackendError when the
    /// child reports {"error": ...} or exits.
    nlohmann::json request(nlohmann::json message);

    const std::string& command() const { return command_; }
    std::chrono::milliseconds timeout() const { return timeout_; }

private:
    struct Slot
    {
        std::optional<nlohmann::json> response;
    };

    void read_loop();
    void fail_all(std::string reason, bool protocol);

    std::string command_;
    std::chrono::milliseconds timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;

    std::mutex write_mu_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<long long, Slot> pending_;
    long long next_id_ = 1;
    std::optional<std::string> broken_;
    bool broken_by_protocol_ = false;

    std::thread reader_;
};

class ProcessClassifier final : public ClassifierBackend
{
public:
    ProcessClassifier(std::shared_ptr<LineChannel> channel, BackendInfo info);
    Prediction classify(const ImageBuf& image) override;
    BackendInfo info() const override { return info_; }

private:
    std::shared_ptr<LineChannel> channel_;
    BackendInfo info_;
};

class ProcessSegmenter final : public SegmenterBackend
{
public:
    ProcessSegmenter(std::shared_ptr<LineChannel> channel, BackendInfo info);
    std::vector<Detection> ground(const ImageBuf& image,
                                  std::string_view prompt,
                                  double box_threshold = kDefaultBoxThreshold,
                                  double text_threshold = kDefaultTextThreshold) override;
    BackendInfo info() const override { return info_; }

private:
    std::shared_ptr<LineChannel> channel_;
    BackendInfo info_;
};

/// Exactly one member is set, according to the kind the child reports in
/// its "info" handshake.
struct ProcessBackend
{
    std::shared_ptr<ClassifierBackend> classifier;
    std::shared_ptr<SegmenterBackend> segmenter;
};

ProcessBackend process_backend(const std::string& command,
                               std::chrono::milliseconds timeout = default_backend_timeout());

} // namespace stcert
