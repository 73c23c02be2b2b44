package com.fix.patterns;

import java.io.IOException;
import java.text.ParseException;

import org.junit.Assert;
import org.junit.Rule;
import org.junit.Test;
import org.junit.rules.ExpectedException;
import org.junit.jupiter.api.Assertions;

import static org.junit.Assert.assertEquals;
import static org.junit.Assert.assertTrue;
import static org.junit.Assert.assertThrows;
import static org.junit.Assert.fail;

public class PatternsTest {

    @Rule
    public ExpectedException thrown = ExpectedException.none();

    @Rule
    public ExpectedException expectedException = ExpectedException.none();

    private final Target target = new Target();
    private final Checker checker = new Checker();

    // --- exceptional: expected-exception annotation ---

    @Test(expected = IllegalStateException.class)
    public void expectAnnotationSimple() {
        target.toggle();
        target.toggle();
    }

    @Test(expected = java.io.IOException.class)
    public void expectAnnotationQualified() throws IOException {
        target.read();
    }

    @Test(timeout = 1000, expected = ParseException.class)
    public void expectAnnotationWithTimeout() throws ParseException {
        target.parse("not a date");
    }

    @Test(expected = IllegalArgumentException.class)
    public void expectAnnotationOverAssertThrows() {
        assertThrows(IllegalStateException.class, () -> target.toggle());
        target.use(null);
    }

    // --- exceptional: assertThrows ---

    @Test
    public void assertThrowsPlain() throws IOException {
        assertThrows(IOException.class, () -> target.read());
    }

    @Test
    public void assertThrowsQualifiedJupiter() {
        Assertions.assertThrows(NumberFormatException.class, () -> target.parseInt("x"));
    }

    @Test
    public void assertThrowsQualifiedJunit4() {
        Assert.assertThrows(IllegalStateException.class, () -> target.toggle());
    }

    @Test
    public void assertThrowsBound() {
        IllegalArgumentException ex =
            assertThrows(IllegalArgumentException.class, () -> target.use(null));
        assertEquals("bad value", ex.getMessage());
    }

    // --- exceptional: ExpectedException rule ---

    @Test
    public void ruleExpectSimple() {
        thrown.expect(NullPointerException.class);
        target.use(null);
    }

    @Test
    public void ruleExpectNamed() {
        expectedException.expect(IllegalStateException.class);
        target.toggle();
    }

    @Test
    public void ruleExpectWithMessage() {
        thrown.expect(IndexOutOfBoundsException.class);
        thrown.expectMessage("boom");
        target.at(99);
    }

    // --- exceptional: try { ...; fail(); } catch ---

    @Test
    public void tryFailCatchPlain() {
        try {
            target.use(null);
            fail();
        } catch (NullPointerException e) {
        }
    }

    @Test
    public void tryFailCatchQualified() {
        try {
            target.use("bad");
            Assert.fail("expected rejection");
        } catch (IllegalArgumentException expected) {
        }
    }

    @Test
    public void tryFailCatchMessage() {
        try {
            target.freeze();
            fail("should have thrown");
        } catch (UnsupportedOperationException e) {
            assertTrue(e.getMessage() != null);
        }
    }

    // --- non-exceptional ---

    @Test
    public void plainAssertion() {
        assertEquals(4, target.twice(2));
    }

    @Test(timeout = 500)
    public void timeoutOnly() {
        assertTrue(target.fastEnough());
    }

    @Test
    public void tryCatchNoFail() {
        boolean handled = false;
        try {
            target.maybe();
        } catch (Exception e) {
            handled = true;
        }
        assertTrue(handled || target.fastEnough());
    }

    @Test
    public void failOutsideTry() {
        if (target.broken()) {
            fail("broken target");
        }
        assertTrue(true);
    }

    @Test
    public void customExpectCall() {
        checker.expectSomething(5);
        assertEquals(5, checker.lastExpected());
    }

    @Test
    public void expectNoClassArg() {
        checker.expect("value");
        assertTrue(checker.satisfied());
    }

    @Test
    public void assertThrowsHelperName() {
        runAssertThrowsScenario();
        assertTrue(true);
    }

    @Test
    public void multiAssert() {
        assertEquals(1, target.at(0));
        assertEquals(2, target.at(1));
        assertTrue(target.fastEnough());
    }

    private void runAssertThrowsScenario() {
        target.twice(3);
    }
}
