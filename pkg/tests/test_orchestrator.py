import sys
import textwrap

import pytest

from pentestmcp.orchestrator import client as oclient
from pentestmcp.orchestrator.cli import build_server_config
from pentestmcp.orchestrator.plan import (
    BindSpec,
    BindingNotFound,
    Plan,
    PlanError,
    PlanStep,
    extract_binding,
    load_plan,
    placeholders_in,
    run_plan,
    substitute,
)
from pentestmcp.orchestrator.report import TraceRecord, TraceReport, parse_structured, render_structured, render_text
from pentestmcp.resources import resolve_plan, resolve_scenario


class FakeHandle:
    """Server-handle stand-in with scripted tool results."""

    def __init__(self, results):
        self.results = results
        self.calls = []

    def call_tool(self, name, arguments):
        self.calls.append((name, arguments))
        result = self.results[len(self.calls) - 1]
        if isinstance(result, Exception):
            raise result
        return result


class TestExtractBinding:
    def test_session_id_pattern_over_sessions_response(self):
        response = '{\n  "1": {\n    "type": "shell"\n  }\n}'
        assert extract_binding(r'"(\d+)": \{', response) == "1"

    def test_no_match_raises(self):
        with pytest.raises(BindingNotFound):
            extract_binding(r'"(\d+)": \{', "no sessions here")

    def test_multiple_matches_first_wins(self):
        response = '{\n  "3": {},\n  "7": {}\n}'
        assert extract_binding(r'"(\d+)"', response) == "3"

    def test_pattern_needs_one_group(self):
        with pytest.raises(PlanError):
            extract_binding(r"\d+", "123")
        with pytest.raises(PlanError):
            extract_binding(r"(\d)(\d)", "12")


class TestSubstitution:
    def test_placeholders_found_recursively(self):
        args = {"a": "${x}", "b": {"c": ["${y}", "plain"]}}
        assert placeholders_in(args) == {"x", "y"}

    def test_whole_string_placeholder_keeps_type(self):
        assert substitute("${sid}", {"sid": 7}) == 7
        assert substitute("id=${sid}", {"sid": 7}) == "id=7"

    def test_unbound_plan_rejected_before_any_step(self):
        plan = Plan(
            name="p",
            steps=(PlanStep(server="nmap", tool="nmap_scan", arguments={"target": "${ghost}"}),),
        )
        handle = FakeHandle([("ok", False)])
        with pytest.raises(PlanError, match="ghost"):
            run_plan({"nmap": handle}, plan)
        assert handle.calls == []


class TestRunPlan:
    def make_plan(self, **step_kwargs):
        return Plan(name="p", steps=(PlanStep(server="nmap", tool="t", arguments={}, **step_kwargs),))

    def test_empty_plan_completes_with_zero_calls(self):
        report = run_plan({}, Plan(name="empty", steps=()))
        assert report.completed
        assert report.tool_call_count == 0

    def test_expect_substrings_checked(self):
        plan = self.make_plan(expect=("alpha", "beta"))
        report = run_plan({"nmap": FakeHandle([("alpha and beta", False)])}, plan)
        assert report.completed
        report = run_plan({"nmap": FakeHandle([("alpha only", False)])}, plan)
        assert report.outcome == "failed-at-step 1"
        assert report.records[0].status == "expectation-failed"

    def test_unexpected_tool_error_stops_plan(self):
        plan = self.make_plan()
        report = run_plan({"nmap": FakeHandle([("boom", True)])}, plan)
        assert report.records[0].status == "tool-error"
        assert not report.completed

    def test_expect_error_step_passes_on_error(self):
        plan = self.make_plan(expect_error=True, expect=("boom",))
        report = run_plan({"nmap": FakeHandle([("boom", True)])}, plan)
        assert report.completed

    def test_expect_error_step_fails_on_success(self):
        plan = self.make_plan(expect_error=True)
        report = run_plan({"nmap": FakeHandle([("fine", False)])}, plan)
        assert report.records[0].status == "expectation-failed"

    def test_bind_flows_between_steps(self):
        plan = Plan(
            name="p",
            steps=(
                PlanStep(
                    server="nmap",
                    tool="a",
                    arguments={},
                    bind=(BindSpec(var="sid", pattern=r"session (\d+)", convert="int"),),
                ),
                PlanStep(server="nmap", tool="b", arguments={"session_id": "${sid}"}),
            ),
        )
        handle = FakeHandle([("session 4 opened", False), ("done", False)])
        report = run_plan({"nmap": handle}, plan)
        assert report.completed
        assert handle.calls[1] == ("b", {"session_id": 4})

    def test_bind_miss_is_expectation_failure(self):
        plan = self.make_plan(bind=(BindSpec(var="x", pattern=r"nope (\d+)"),))
        report = run_plan({"nmap": FakeHandle([("nothing", False)])}, plan)
        assert report.records[0].status == "expectation-failed"

    def test_transport_failure_is_tool_error_record(self):
        plan = self.make_plan()
        handle = FakeHandle([oclient.McpClientError("server 'nmap' closed the connection")])
        report = run_plan({"nmap": handle}, plan)
        assert report.records[0].status == "tool-error"
        assert "closed the connection" in report.records[0].response

    def test_tool_call_count_counts_executed_steps(self):
        steps = tuple(PlanStep(server="nmap", tool="t", arguments={}) for _ in range(3))
        plan = Plan(name="p", steps=steps)
        handle = FakeHandle([("ok", False), ("boom", True), ("never", False)])
        report = run_plan({"nmap": handle}, plan)
        assert report.tool_call_count == 2


class TestPlanLoading:
    def test_shipped_plans_load(self):
        plan = load_plan(resolve_plan("plan-5638"))
        assert plan.name == "plan-5638"
        assert len(plan.steps) == 11
        plan = load_plan(resolve_plan("plan-0144"))
        assert len(plan.steps) == 13
        assert plan.steps[6].expect_error

    def test_unknown_server_rejected(self, tmp_path):
        doc = textwrap.dedent(
            """
            name: bad
            steps:
              - server: hydra
                tool: x
            """
        )
        path = tmp_path / "bad.yaml"
        path.write_text(doc)
        with pytest.raises(PlanError, match="hydra"):
            load_plan(path)

    def test_bad_bind_pattern_rejected(self, tmp_path):
        doc = textwrap.dedent(
            """
            name: bad
            steps:
              - server: nmap
                tool: x
                bind:
                  - {var: v, pattern: "no groups"}
            """
        )
        path = tmp_path / "bad.yaml"
        path.write_text(doc)
        with pytest.raises(PlanError, match="capture group"):
            load_plan(path)


class TestReports:
    def make_report(self, outcome="completed"):
        records = (
            TraceRecord(1, "nmap", "nmap_scan", {"target": "h"}, "line1\nline2", "pass"),
            TraceRecord(2, "metasploit", "metasploit_sessions", {}, "{}", "pass"),
        )
        return TraceReport(plan_name="p", records=records, outcome=outcome)

    def test_text_render_has_step_rows_and_call_count(self):
        text = render_text(self.make_report()).decode()
        assert text.count("Step ") == 2
        assert "tool calls: 2" in text

    def test_failed_render_mentions_failed_at_step(self):
        text = render_text(self.make_report(outcome="failed-at-step 2")).decode()
        assert "failed-at-step 2" in text

    def test_structured_roundtrip(self):
        report = self.make_report()
        assert parse_structured(render_structured(report)) == report

    def test_record_indexes_must_be_contiguous(self):
        record = TraceRecord(2, "nmap", "t", {}, "", "pass")
        with pytest.raises(ValueError):
            TraceReport(plan_name="p", records=(record,), outcome="completed")


@pytest.mark.integration
class TestLiveServers:
    def test_spawn_all_four_servers(self, tmp_path):
        scenario = str(resolve_scenario("struts-5638"))
        handles = oclient.spawn_servers(build_server_config("mock", scenario))
        try:
            assert set(handles) == {"nmap", "curl", "nuclei", "metasploit"}
            assert len(handles["metasploit"].tools) == 7
            assert handles["nmap"].server_info["name"] == "pentestmcp-nmap"
        finally:
            oclient.shutdown_servers(handles)
        # closing stdin is a clean shutdown request: every server exits 0
        assert [h.proc.returncode for h in handles.values()] == [0, 0, 0, 0]

    def test_bad_command_is_startup_error_naming_server(self):
        with pytest.raises(oclient.McpStartupError, match="nuclei"):
            oclient.spawn_servers({"nuclei": ["/no/such/binary"]})

    def test_killed_server_aborts_plan(self):
        scenario = str(resolve_scenario("struts-5638"))
        config = {"nmap": build_server_config("mock", scenario)["nmap"]}
        handles = oclient.spawn_servers(config)
        try:
            plan = Plan(
                name="crash",
                steps=(
                    PlanStep(
                        server="nmap",
                        tool="nmap_scan",
                        arguments={"target": "10.138.0.19"},
                    ),
                ),
            )
            handles["nmap"].proc.kill()
            handles["nmap"].proc.wait()
            report = run_plan(handles, plan)
            assert report.outcome == "failed-at-step 1"
            assert report.records[0].status == "tool-error"
        finally:
            oclient.shutdown_servers(handles)

    def test_msf_server_over_http_daemon(self, monkeypatch):
        import threading

        from pentestmcp.mock.msf_daemon import FakeMsfDaemon, make_http_server
        from pentestmcp.mock.scenario import load_scenario

        daemon = FakeMsfDaemon(load_scenario(resolve_scenario("struts-5638")))
        http_server = make_http_server(daemon, "127.0.0.1", 0)
        thread = threading.Thread(target=http_server.serve_forever, daemon=True)
        thread.start()
        port = http_server.server_address[1]
        monkeypatch.setenv("MSF_PASSWORD", "anything")
        argv = [
            sys.executable,
            "-m",
            "pentestmcp.msf.server",
            "--backend",
            "real",
            "--msf-host",
            "127.0.0.1",
            "--msf-port",
            str(port),
        ]
        try:
            handle = oclient.spawn_server("metasploit", argv)
            try:
                text, is_error = handle.call_tool("metasploit_search", {"query": "struts"})
                assert not is_error
                assert "struts2_content_type_ognl" in text
            finally:
                handle.close()
            assert daemon.login_count == 1
        finally:
            http_server.shutdown()
            http_server.server_close()

    def test_cli_exit_code_1_when_plan_fails(self, tmp_path):
        from pentestmcp.orchestrator.cli import main

        out = tmp_path / "report.txt"
        rc = main(
            [
                "--plan",
                "plan-5638",
                "--scenario",
                "struts-5638",
                "--backend",
                "mock",
                "--bind",
                "target=10.9.9.9",
                "--out",
                str(out),
            ]
        )
        assert rc == 1
        assert b"failed-at-step 1" in out.read_bytes()

    def test_replay_is_byte_identical(self):
        plan = load_plan(resolve_plan("plan-5638"))
        scenario = str(resolve_scenario("struts-5638"))

        def one_run() -> bytes:
            handles = oclient.spawn_servers(build_server_config("mock", scenario))
            try:
                return render_structured(run_plan(handles, plan))
            finally:
                oclient.shutdown_servers(handles)

        first = one_run()
        assert first == one_run()
        report = parse_structured(first)
        text = render_text(report).decode()
        assert text.count("Step ") == 11
        assert "tool calls: 11" in text
