"""Tests for Claude Swarm Coordinator."""