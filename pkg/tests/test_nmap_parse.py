import pytest

from pentestmcp.mock.scan_exec import build_nmap_xml
from pentestmcp.scanners.nmap import NmapXmlError, ScanReport, ServiceRecord, parse_nmap_xml, render_scan_report

import nmap_fixtures as fx


class TestParse:
    def test_two_open_ports(self):
        report = parse_nmap_xml(fx.TWO_PORTS_XML)
        assert report.target == "192.0.2.10"
        assert report.services == fx.TWO_PORTS_EXPECTED
        assert report.os_guess is None
        assert report.script_results == ()

    def test_zero_hosts_up(self):
        report = parse_nmap_xml(fx.NO_HOSTS_XML)
        assert report.services == ()

    def test_filtered_state_scripts_and_os_preserved(self):
        report = parse_nmap_xml(fx.MIXED_STATES_XML)
        assert report.services == fx.MIXED_STATES_EXPECTED
        assert report.script_results == fx.MIXED_STATES_SCRIPTS
        assert report.os_guess == "Linux 5.4"

    def test_malformed_xml_names_byte_offset(self):
        with pytest.raises(NmapXmlError, match=r"byte offset \d+"):
            parse_nmap_xml(fx.MALFORMED_XML)

    def test_duplicate_port_rejected(self):
        with pytest.raises(NmapXmlError, match="duplicate"):
            parse_nmap_xml(fx.DUPLICATE_PORT_XML)

    def test_not_nmap_output_rejected(self):
        with pytest.raises(NmapXmlError):
            parse_nmap_xml(b"<html></html>")


class TestReportInvariants:
    def test_services_sorted_by_port_and_protocol(self):
        report = parse_nmap_xml(fx.MIXED_STATES_XML)
        keys = [(s.port, s.protocol) for s in report.services]
        assert keys == sorted(keys)

    def test_duplicate_service_entries_rejected(self):
        svc = ServiceRecord(80, "tcp", "open", "http")
        with pytest.raises(ValueError, match="duplicate"):
            ScanReport(target="x", services=(svc, svc))

    def test_port_range_enforced(self):
        with pytest.raises(ValueError):
            ServiceRecord(0, "tcp", "open", "x")
        with pytest.raises(ValueError):
            ServiceRecord(70000, "tcp", "open", "x")
        with pytest.raises(ValueError):
            ServiceRecord(80, "tcp", "half-open", "x")


class TestRender:
    def test_port_lines_match_the_table_shape(self):
        text = render_scan_report(parse_nmap_xml(fx.TWO_PORTS_XML))
        assert "22/tcp open  ssh" in text
        assert "OpenSSH 8.9p1 (protocol 2.0)" in text
        assert "80/tcp open  http" in text

    def test_script_section_present(self):
        text = render_scan_report(parse_nmap_xml(fx.MIXED_STATES_XML))
        assert "Host script results:" in text
        assert "| http-title:" in text
        assert "OS details: Linux 5.4" in text

    def test_empty_scan_renders_zero_hosts(self):
        assert "0 hosts up" in render_scan_report(parse_nmap_xml(fx.NO_HOSTS_XML))


class TestStability:
    @pytest.mark.parametrize("xml", [fx.TWO_PORTS_XML, fx.MIXED_STATES_XML])
    def test_parse_regenerate_parse_is_identity(self, xml):
        first = parse_nmap_xml(xml)
        regenerated = build_nmap_xml(
            first.target,
            services=first.services,
            scripts=first.script_results,
            os_name=first.os_guess,
        )
        assert parse_nmap_xml(regenerated) == first
