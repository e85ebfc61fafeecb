#include "stcert/process_backend.hpp"

#include "stcert/codec.hpp"
#include "stcert/error.hpp"

#include <csignal>
#include <cstdlib>
#include <cstring>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace stcert
{

using nlohmann::json;

std::chrono::milliseconds default_backend_timeout()
{
    if (const char* env = std::getenv("STCERT_BACKEND_TIMEOUT_S"))
    {
        char* end = nullptr;
        double seconds = std::strtod(env, &end);
        if (end != env && seconds > 0)
            return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
    }
    return std::chrono::seconds(120);
}

LineChannel::LineChannel(const std::string& command, std::chrono::milliseconds timeout)
    : command_(command), timeout_(timeout)
{
    // Writes to a dead child must surface as EPIPE, not kill the process.
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0)
        throw BackendError("pipe: " + std::string(std::strerror(errno)));
    if (pipe2(out_pipe, O_CLOEXEC) != 0)
    {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw BackendError("pipe: " + std::string(std::strerror(errno)));
    }

    pid_t pid = fork();
    if (pid < 0)
    {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]})
            ::close(fd);
        throw BackendError("fork: " + std::string(std::strerror(errno)));
    }
    if (pid == 0)
    {
        setpgid(0, 0);
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    reader_ = std::thread([this] { read_loop(); });
}

LineChannel::~LineChannel()
{
    if (to_child_ >= 0)
        ::close(to_child_);
    // Give the child a moment to exit on EOF, then take the process group down.
    bool exited = false;
    for (int i = 0; i < 50 && !exited; ++i)
    {
        exited = waitpid(pid_, nullptr, WNOHANG) == pid_;
        if (!exited)
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    // Also reaps grandchildren that might still hold the stdout pipe open.
    kill(-pid_, SIGKILL);
    if (!exited)
        waitpid(pid_, nullptr, 0);
    if (reader_.joinable())
        reader_.join();
    ::close(from_child_);
}

void LineChannel::fail_all(std::string reason, bool protocol)
{
    std::lock_guard lk(mu_);
    if (!broken_)
    {
        broken_ = std::move(reason);
        broken_by_protocol_ = protocol;
    }
    cv_.notify_all();
}

void LineChannel::read_loop()
{
    std::string buffer;
    char chunk[65536];
    for (;;)
    {
        ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
        {
            fail_all("backend process exited: " + command_, false);
            return;
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1)
        {
            std::string_view line(buffer.data() + start, nl - start);
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            if (line.empty())
                continue;
            json msg = json::parse(line, nullptr, false);
            if (msg.is_discarded() || !msg.is_object())
            {
                fail_all("malformed JSON line from backend: " + std::string(line.substr(0, 200)), true);
                return;
            }
            auto id_it = msg.find("id");
            if (id_it == msg.end() || !id_it->is_number_integer())
            {
                fail_all("backend response without integer id", true);
                return;
            }
            const long long id = id_it->get<long long>();
            std::lock_guard lk(mu_);
            if (auto it = pending_.find(id); it != pending_.end())
            {
                it->second.response = std::move(msg);
                cv_.notify_all();
            }
            else if (id <= 0 || id >= next_id_)
            {
                broken_ = "backend answered unknown request id " + std::to_string(id);
                broken_by_protocol_ = true;
                cv_.notify_all();
                return;
            }
            // Otherwise: a late answer to a request that already timed out.
        }
        buffer.erase(0, start);
    }
}

json LineChannel::request(json message)
{
    long long id;
    {
        std::lock_guard lk(mu_);
        if (broken_)
        {
            if (broken_by_protocol_)
                throw ProtocolError(*broken_);
            throw BackendError(*broken_);
        }
        id = next_id_++;
        pending_.emplace(id, Slot{});
    }
    message["id"] = id;
    const std::string line = message.dump() + "\n";
    {
        std::lock_guard wl(write_mu_);
        std::size_t off = 0;
        while (off < line.size())
        {
            ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
            {
                std::lock_guard lk(mu_);
                pending_.erase(id);
                throw BackendError("cannot write to backend process: " + std::string(std::strerror(errno)));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::unique_lock lk(mu_);
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    const bool done = cv_.wait_until(lk, deadline, [&] { return pending_.at(id).response || broken_; });
    auto node = pending_.extract(id);
    if (node.mapped().response)
    {
        json response = std::move(*node.mapped().response);
        if (auto err = response.find("error"); err != response.end())
            throw BackendError("backend error: " + (err->is_string() ? err->get<std::string>() : err->dump()));
        return response;
    }
    if (broken_)
    {
        if (broken_by_protocol_)
            throw ProtocolError(*broken_);
        throw BackendError(*broken_);
    }
    (void)done;
    throw TimeoutError("backend request " + std::to_string(id) + " timed out after " +
                       std::to_string(timeout_.count()) + " ms");
}

namespace
{

template <class T>
T field(const json& msg, const char* key)
{
    auto it = msg.find(key);
    if (it == msg.end())
        throw ProtocolError(std::string("backend response lacks \"") + key + "\"");
    try
    {
        return it->get<T>();
    }
    catch (const json::exception&)
    {
        throw ProtocolError(std::string("backend response field \"") + key + "\" has the wrong type");
    }
}

} // namespace

ProcessClassifier::ProcessClassifier(std::shared_ptr<LineChannel> channel, BackendInfo info)
    : channel_(std::move(channel)), info_(std::move(info))
{
}

Prediction ProcessClassifier::classify(const ImageBuf& image)
{
    auto response = channel_->request({{"op", "classify"}, {"image_png_b64", base64_encode(encode_png(image))}});
    if (!response["class_id"].is_number_integer())
        throw ProtocolError("classify response: class_id must be an integer");
    Prediction p{field<int>(response, "class_id"), field<double>(response, "confidence")};
    if (p.class_id < 0 || (info_.class_count > 0 && p.class_id >= info_.class_count))
        throw ProtocolError("classify response: class_id " + std::to_string(p.class_id) + " out of range");
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
        throw ProtocolError("classify response: confidence outside [0,1]");
    return p;
}

ProcessSegmenter::ProcessSegmenter(std::shared_ptr<LineChannel> channel, BackendInfo info)
    : channel_(std::move(channel)), info_(std::move(info))
{
}

std::vector<Detection> ProcessSegmenter::ground(const ImageBuf& image, std::string_view prompt,
                                                double box_threshold, double text_threshold)
{
    auto response = channel_->request({{"op", "ground"},
                                       {"image_png_b64", base64_encode(encode_png(image))},
                                       {"prompt", std::string(prompt)},
                                       {"box_threshold", box_threshold},
                                       {"text_threshold", text_threshold}});
    const auto jdets = field<json>(response, "detections");
    if (!jdets.is_array())
        throw ProtocolError("ground response: detections must be an array");
    std::vector<Detection> out;
    for (const auto& jd : jdets)
    {
        if (!jd.is_object())
            throw ProtocolError("ground response: detection must be an object");
        const auto box = field<std::vector<int>>(jd, "box");
        if (box.size() != 4)
            throw ProtocolError("ground response: box must have 4 coordinates");
        const int mw = field<int>(jd, "mask_w");
        const int mh = field<int>(jd, "mask_h");
        if (mw != image.width() || mh != image.height())
            throw ProtocolError("ground response: mask size differs from the image");
        const auto runs = field<std::vector<std::uint32_t>>(jd, "mask_rle");
        Detection d;
        d.box = {box[0], box[1], box[2], box[3]};
        if (!d.box.within(mw, mh))
            throw ProtocolError("ground response: box outside the image");
        try
        {
            d.mask = rle_decode(runs, mw, mh);
        }
        catch (const ImageError& e)
        {
            throw ProtocolError(std::string("ground response: ") + e.what());
        }
        d.score = field<double>(jd, "score");
        if (d.score >= box_threshold)
            out.push_back(std::move(d));
    }
    return out;
}

ProcessBackend process_backend(const std::string& command, std::chrono::milliseconds timeout)
{
    auto channel = std::make_shared<LineChannel>(command, timeout);
    auto response = channel->request({{"op", "info"}});
    BackendInfo info;
    info.kind = field<std::string>(response, "kind");
    info.name = field<std::string>(response, "name");
    info.class_count = field<int>(response, "class_count");
    info.thread_safe = field<bool>(response, "thread_safe");
    ProcessBackend out;
    if (info.kind == "classifier")
        out.classifier = std::make_shared<ProcessClassifier>(channel, info);
    else if (info.kind == "segmenter")
        out.segmenter = std::make_shared<ProcessSegmenter>(channel, info);
    else
        throw ProtocolError("info: unknown backend kind \"" + info.kind + "\"");
    return out;
}

} // namespace stcert
