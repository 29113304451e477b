import json

import pytest

from pentestmcp.backends import SubprocessBackend
from pentestmcp.mock.scan_exec import MockExecBackend, mock_exec
from pentestmcp.protocol import ToolError
from pentestmcp.scanners.curl import curl_request
from pentestmcp.scanners.nmap import nmap_scan, parse_nmap_xml
from pentestmcp.scanners.nuclei import nuclei_scan


@pytest.fixture()
def struts_backend(struts_fixture):
    return MockExecBackend(struts_fixture)


@pytest.fixture()
def blue_backend(blue_fixture):
    return MockExecBackend(blue_fixture)


class TestNmapScan:
    def test_struts_full_scan_matches_trace(self, struts_backend):
        result = nmap_scan(struts_backend, "10.138.0.19", "-sV -sC -p-", timeout=5)
        text = result.joined()
        assert not result.is_error
        assert "22/tcp open  ssh" in text
        assert "OpenSSH 8.9p1" in text
        assert "80/tcp open  http" in text
        assert "Apache Tomcat/Coyote JSP engine 1.1" in text

    def test_blue_service_scan_matches_trace(self, blue_backend):
        text = nmap_scan(blue_backend, "10.201.77.154", "-sS -sV -O", timeout=5).joined()
        for needle in ("135/tcp", "139/tcp", "445/tcp", "Microsoft Windows"):
            assert needle in text

    def test_blue_smb_script_scan_matches_trace(self, blue_backend):
        text = nmap_scan(
            blue_backend,
            "10.201.77.154",
            "-p445 --script smb-vuln-ms17-010,smb-protocols,smb",
            timeout=5,
        ).joined()
        assert "445/tcp open  microsoft-ds" in text
        assert "Host script results:" in text
        assert "smb-vuln-ms17-010" in text
        assert "CVE-2017-0144" in text
        assert "135/tcp" not in text  # port filter applied

    def test_structured_report_embedded(self, struts_backend):
        result = nmap_scan(struts_backend, "10.138.0.19", "", timeout=5)
        structured = json.loads(result.content[1])
        assert [s["port"] for s in structured["services"]] == [22, 80]

    def test_sanitize_rejection_is_tool_error(self, struts_backend):
        with pytest.raises(ToolError, match="rejected option token"):
            nmap_scan(struts_backend, "10.138.0.19", "-sV; reboot", timeout=5)

    def test_bad_target_is_tool_error(self, struts_backend):
        with pytest.raises(ToolError):
            nmap_scan(struts_backend, "10.138.0.19; ls", "", timeout=5)

    def test_unknown_host_scans_clean(self, struts_backend):
        text = nmap_scan(struts_backend, "10.138.0.99", "-sV", timeout=5).joined()
        assert "0 hosts up" in text

    def test_backend_failure_carries_stderr(self):
        class FailingBackend:
            def run(self, argv, stdin=None, timeout=None):
                return 1, b"", b"nmap: permission denied"

        with pytest.raises(ToolError, match="permission denied"):
            nmap_scan(FailingBackend(), "10.0.0.1", "", timeout=5)


class TestCurlRequest:
    def test_get_root_is_200(self, struts_backend):
        result = curl_request(struts_backend, "http://10.138.0.19/")
        assert not result.is_error
        assert result.joined().startswith("HTTP/1.1 200")
        assert "Struts2 Showcase" in result.joined()

    def test_missing_path_is_404_not_error(self, struts_backend):
        result = curl_request(struts_backend, "http://10.138.0.19/nope")
        assert not result.is_error
        assert result.joined().startswith("HTTP/1.1 404")

    def test_unsupported_scheme_is_tool_error(self, struts_backend):
        with pytest.raises(ToolError, match="scheme"):
            curl_request(struts_backend, "ftp://x")

    def test_connection_refused_surfaces_curl_stderr(self, struts_backend):
        with pytest.raises(ToolError, match=r"curl: \(7\)"):
            curl_request(struts_backend, "http://10.138.0.77/")

    def test_crlf_header_rejected(self, struts_backend):
        with pytest.raises(ToolError, match="control characters"):
            curl_request(struts_backend, "http://10.138.0.19/", headers=["X: 1\r\nHost: e"])


class TestNucleiScan:
    def test_struts_findings_match_trace(self, struts_backend):
        text = nuclei_scan(struts_backend, "10.138.0.19").joined()
        assert "[CVE-2013-2251] [critical]" in text
        assert "[CVE-2017-5638]" in text
        assert "[CVE-2017-9791]" in text

    def test_host_without_findings(self, blue_backend):
        assert nuclei_scan(blue_backend, "10.201.77.154").joined() == "no findings"

    def test_severity_filter_applied(self, struts_fixture):
        backend = MockExecBackend(struts_fixture)
        text = nuclei_scan(backend, "10.138.0.19", severity="low").joined()
        assert text == "no findings"

    def test_template_filter_applied(self, struts_backend):
        text = nuclei_scan(struts_backend, "10.138.0.19", templates="CVE-2017-5638").joined()
        assert text.splitlines() == ["[CVE-2017-5638] [critical] http://10.138.0.19/"]


class TestMockExec:
    def test_unsupported_binary_is_127(self, struts_fixture):
        code, _, stderr = mock_exec(struts_fixture, ["gobuster", "dir"])
        assert code == 127
        assert b"unsupported" in stderr

    def test_deterministic_for_identical_argv(self, struts_fixture):
        argv = ["nmap", "-sV", "-oX", "-", "10.138.0.19"]
        assert mock_exec(struts_fixture, argv) == mock_exec(struts_fixture, argv)

    def test_nmap_xml_parses_back_to_fixture_ports(self, struts_fixture):
        _, stdout, _ = mock_exec(struts_fixture, ["nmap", "-oX", "-", "10.138.0.19"])
        report = parse_nmap_xml(stdout)
        assert {s.port for s in report.services} == {22, 80}


class TestNoFilesystemWrites:
    def test_handlers_leave_cwd_untouched(self, struts_backend, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        nmap_scan(struts_backend, "10.138.0.19", "-sV -sC -p-", timeout=5)
        nuclei_scan(struts_backend, "10.138.0.19")
        curl_request(struts_backend, "http://10.138.0.19/")
        assert list(tmp_path.iterdir()) == []


class TestSubprocessBackend:
    def test_missing_binary_reports_127(self):
        code, _, stderr = SubprocessBackend().run(["definitely-not-a-real-binary-xyz"])
        assert code == 127
        assert b"not found" in stderr

    def test_runs_argv_without_shell(self):
        code, stdout, _ = SubprocessBackend().run(["/bin/echo", "$("] )
        assert code == 0
        assert stdout.strip() == b"$("


class TestServerSurfaces:
    def test_each_scanner_exports_exactly_its_table_tool(self, struts_backend):
        from pentestmcp.scanners import curl as curl_mod
        from pentestmcp.scanners import nmap as nmap_mod
        from pentestmcp.scanners import nuclei as nuclei_mod

        for module, tool in ((nmap_mod, "nmap_scan"), (curl_mod, "curl_request"), (nuclei_mod, "nuclei_scan")):
            registry = module.build_registry(struts_backend, timeout=5)
            assert [d.name for d in registry.descriptors()] == [tool]

    def test_registry_must_not_be_empty(self):
        from pentestmcp.protocol import McpServer, ToolRegistry

        with pytest.raises(ValueError, match="empty"):
            McpServer("s", "1", ToolRegistry())

    def test_full_server_scan_call(self, struts_backend):
        from pentestmcp import __version__
        from pentestmcp.protocol import McpServer
        from pentestmcp.scanners.nmap import build_registry

        server = McpServer("pentestmcp-nmap", __version__, build_registry(struts_backend, timeout=5))
        server.handle_initialize(None)
        result = server.handle_tools_call(
            "nmap_scan", {"target": "10.138.0.19", "options": "-sV -sC -p-"}
        )
        assert not result.is_error
        assert "Apache Tomcat/Coyote JSP engine" in result.joined()


class TestBackendSelection:
    def test_env_fallback_selects_scenario(self, monkeypatch):
        import argparse

        from pentestmcp.backends import build_exec_backend

        monkeypatch.setenv("PENTESTMCP_MOCK_SCENARIO", "struts-5638")
        args = argparse.Namespace(backend="mock", scenario=None, timeout_secs=5)
        backend = build_exec_backend(args)
        assert backend.fixture.name == "struts-5638"

    def test_mock_without_scenario_exits(self, monkeypatch):
        import argparse

        from pentestmcp.backends import build_exec_backend

        monkeypatch.delenv("PENTESTMCP_MOCK_SCENARIO", raising=False)
        args = argparse.Namespace(backend="mock", scenario=None, timeout_secs=5)
        with pytest.raises(SystemExit):
            build_exec_backend(args)

    def test_msf_real_backend_needs_password_env(self, monkeypatch):
        import argparse

        from pentestmcp.msf.server import build_client

        monkeypatch.delenv("MSF_PASSWORD", raising=False)
        args = argparse.Namespace(
            backend="real", scenario=None, msf_host="127.0.0.1", msf_port=55553, msf_user="msf", tls=False
        )
        with pytest.raises(SystemExit, match="MSF_PASSWORD"):
            build_client(args)
