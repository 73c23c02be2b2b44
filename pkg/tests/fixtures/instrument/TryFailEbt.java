package com.fix;

import org.junit.Test;
import static org.junit.Assert.fail;

public class TryFailEbt {

    @Test
    public void rejectsNull() {
        Widget w = new Widget();
        try {
            w.install(null);
            fail("expected rejection");
        } catch (NullPointerException e) {
        }
    }
}
